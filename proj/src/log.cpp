#include "ncl/log.hpp"

#include <cstdio>
#include <cstdlib>
#include <string>

namespace ncl {

namespace {

LogLevel parse_level(const char* s) {
  if (s == nullptr) return LogLevel::warn;
  const std::string v(s);
  if (v == "off") return LogLevel::off;
  if (v == "error") return LogLevel::error;
  if (v == "warn") return LogLevel::warn;
  if (v == "info") return LogLevel::info;
  if (v == "debug") return LogLevel::debug;
  return LogLevel::warn;
}

const char* level_tag(LogLevel level) {
  switch (level) {
    case LogLevel::error: return "error";
    case LogLevel::warn: return "warn";
    case LogLevel::info: return "info";
    case LogLevel::debug: return "debug";
    default: return "?";
  }
}

}  // namespace

LogLevel log_level() {
  static const LogLevel level = parse_level(std::getenv("NCL_LOG"));
  return level;
}

void log_message(LogLevel level, const std::string& msg) {
  if (static_cast<int>(level) > static_cast<int>(log_level())) return;
  std::fprintf(stderr, "[ncl %s] %s\n", level_tag(level), msg.c_str());
}

}  // namespace ncl
