#pragma once

#include <string>

namespace ncl {

enum class LogLevel { off = 0, error = 1, warn = 2, info = 3, debug = 4 };

/// Verbosity comes from the NCL_LOG environment variable
/// (off|error|warn|info|debug); default is warn. Messages go to stderr so
/// they never contaminate CSV/JSON outputs.
LogLevel log_level();

void log_message(LogLevel level, const std::string& msg);

inline void log_error(const std::string& msg) { log_message(LogLevel::error, msg); }
inline void log_warn(const std::string& msg) { log_message(LogLevel::warn, msg); }
inline void log_info(const std::string& msg) { log_message(LogLevel::info, msg); }
inline void log_debug(const std::string& msg) { log_message(LogLevel::debug, msg); }

}  // namespace ncl
