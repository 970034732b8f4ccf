#include "ncl/cli/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ncl/csv.hpp"
#include "ncl/errors.hpp"

namespace ncl::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

bool valid_key(const std::string& key) {
  if (key.empty()) return false;
  for (char ch : key) {
    const bool ok = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') ||
                    (ch >= '0' && ch <= '9') || ch == '_' || ch == '.' || ch == '-';
    if (!ok) return false;
  }
  return true;
}

}  // namespace

RawConfig parse_config_text(const std::string& text, const std::string& origin) {
  RawConfig raw;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!valid_key(key))
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": bad key '" + key + "'");
    if (raw.count(key))
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    raw[key] = value;
  }
  return raw;
}

RawConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

std::string canonical_int(std::int64_t v) { return std::to_string(v); }
std::string canonical_real(double v) { return format_double(v); }
std::string canonical_bool(bool v) { return v ? "true" : "false"; }

namespace {

std::int64_t parse_int(const std::string& key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(value.c_str(), &end, 10);
  if (errno != 0 || end != value.c_str() + value.size() || value.empty())
    throw ConfigError("key '" + key + "': expected an integer, got '" + value + "'");
  return v;
}

double parse_real(const std::string& key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (errno != 0 || end != value.c_str() + value.size() || value.empty())
    throw ConfigError("key '" + key + "': expected a number, got '" + value + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true") return true;
  if (value == "false") return false;
  throw ConfigError("key '" + key + "': expected true or false, got '" + value + "'");
}

}  // namespace

std::int64_t ResolvedConfig::get_int(const std::string& key) const {
  return parse_int(key, get_text(key));
}

double ResolvedConfig::get_real(const std::string& key) const {
  return parse_real(key, get_text(key));
}

bool ResolvedConfig::get_bool(const std::string& key) const {
  return parse_bool(key, get_text(key));
}

const std::string& ResolvedConfig::get_text(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("internal: unresolved config key '" + key + "'");
  return it->second;
}

void ResolvedConfig::set_canonical(const std::string& key, std::string value) {
  values_[key] = std::move(value);
}

std::string ResolvedConfig::canonical_text() const {
  std::string out;
  for (const auto& [key, value] : values_) {
    out += key;
    out += " = ";
    out += value;
    out += '\n';
  }
  return out;
}

std::string ResolvedConfig::hash() const {
  // FNV-1a, 64-bit.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical_text()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ResolvedConfig resolve_config(const RawConfig& raw, const std::vector<KeyDef>& schema) {
  // Fail fast on unknown keys so a typo in a sweep never runs silently.
  for (const auto& [key, value] : raw) {
    const bool known = std::any_of(schema.begin(), schema.end(),
                                   [&](const KeyDef& d) { return d.key == key; });
    if (!known) {
      std::string valid;
      for (const KeyDef& d : schema) valid += (valid.empty() ? "" : ", ") + d.key;
      throw ConfigError("unknown config key '" + key + "' (valid keys: " + valid + ")");
    }
  }

  ResolvedConfig resolved;
  for (const KeyDef& def : schema) {
    const auto it = raw.find(def.key);
    std::string value = it != raw.end() ? it->second : def.default_value;
    if (it == raw.end() && def.required)
      throw ConfigError("missing required config key '" + def.key + "'");
    switch (def.type) {
      case ValueType::integer:
        value = canonical_int(parse_int(def.key, value));
        break;
      case ValueType::real:
        value = canonical_real(parse_real(def.key, value));
        break;
      case ValueType::boolean:
        value = canonical_bool(parse_bool(def.key, value));
        break;
      case ValueType::text:
        if (!def.allowed.empty() &&
            std::find(def.allowed.begin(), def.allowed.end(), value) == def.allowed.end()) {
          std::string opts;
          for (const auto& a : def.allowed) opts += (opts.empty() ? "" : ", ") + a;
          throw ConfigError("key '" + def.key + "': value '" + value + "' not one of: " + opts);
        }
        break;
    }
    resolved.set_canonical(def.key, std::move(value));
  }
  return resolved;
}

}  // namespace ncl::cli
