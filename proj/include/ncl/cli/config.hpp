#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace ncl::cli {

enum class ValueType { integer, real, boolean, text };

/// One schema entry: key name, type, default (empty string + required=true
/// means the user must supply it), and an optional closed set of allowed
/// values for text keys.
struct KeyDef {
  std::string key;
  ValueType type = ValueType::text;
  std::string default_value;
  bool required = false;
  std::vector<std::string> allowed;  // empty = free-form
};

using RawConfig = std::map<std::string, std::string>;

/// Parse `key = value` lines. '#' starts a comment, blank lines are
/// ignored, duplicate keys are an error. Throws ConfigError with the line
/// number on malformed input.
RawConfig parse_config_text(const std::string& text, const std::string& origin);
RawConfig parse_config_file(const std::string& path);

/// A validated config with every default filled in. Values are stored in
/// canonical text form so hashing and re-emission are deterministic.
class ResolvedConfig {
 public:
  ResolvedConfig() = default;

  std::int64_t get_int(const std::string& key) const;
  double get_real(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  const std::string& get_text(const std::string& key) const;

  void set_canonical(const std::string& key, std::string value);
  const std::map<std::string, std::string>& values() const { return values_; }

  /// Sorted `key = value` lines; parseable by parse_config_text, so a run
  /// is re-launchable from its own manifest verbatim.
  std::string canonical_text() const;

  /// FNV-1a 64 over canonical_text(), hex encoded.
  std::string hash() const;

 private:
  std::map<std::string, std::string> values_;
};

/// Validate a raw config against a schema: unknown keys are rejected
/// (fail-fast, naming the offender), types are checked, defaults filled.
ResolvedConfig resolve_config(const RawConfig& raw, const std::vector<KeyDef>& schema);

std::string canonical_int(std::int64_t v);
std::string canonical_real(double v);
std::string canonical_bool(bool v);

}  // namespace ncl::cli
