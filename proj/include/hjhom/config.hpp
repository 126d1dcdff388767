#pragma once

// Plain-text key=value configuration.
//
//   # comment            (also allowed after a value)
//   key = value
//   key=value
//
// Keys are dotted identifiers ([A-Za-z0-9_.]). Blank lines are ignored.
// Duplicate keys, missing '=', empty keys and unknown keys (when a schema is
// applied) are errors reported with the 1-based line number.

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hjhom/common.hpp"

namespace hjhom {

class ConfigParseError : public ConfigError {
 public:
  ConfigParseError(int line, const std::string& what)
      : ConfigError("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

inline bool valid_key(std::string_view k) {
  if (k.empty()) return false;
  return std::all_of(k.begin(), k.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
  });
}

}  // namespace detail

class Config {
 public:
  struct Entry {
    std::string value;
    int line = 0;
  };

  static Config parse(std::string_view text) {
    Config cfg;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      std::size_t nl = text.find('\n', pos);
      if (nl == std::string_view::npos) nl = text.size();
      std::string_view raw = text.substr(pos, nl - pos);
      pos = nl + 1;
      ++line_no;
      if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
      std::string line = detail::trim(raw);
      if (line.empty()) {
        if (nl == text.size()) break;
        continue;
      }
      auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigParseError(line_no, "expected 'key = value'");
      std::string key = detail::trim(std::string_view(line).substr(0, eq));
      std::string value = detail::trim(std::string_view(line).substr(eq + 1));
      if (!detail::valid_key(key)) throw ConfigParseError(line_no, "malformed key '" + key + "'");
      if (cfg.entries_.count(key))
        throw ConfigParseError(line_no, "duplicate key '" + key + "' (first set on line " +
                                            std::to_string(cfg.entries_[key].line) + ")");
      cfg.entries_[key] = Entry{value, line_no};
      if (nl == text.size()) break;
    }
    return cfg;
  }

  static Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
  }

  /// Rejects keys outside `known`.
  void require_known(const std::set<std::string>& known) const {
    for (const auto& [k, e] : entries_)
      if (!known.count(k)) throw ConfigParseError(e.line, "unknown key '" + k + "'");
  }

  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  void set(const std::string& key, const std::string& value) { entries_[key] = Entry{value, 0}; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? fallback : it->second.value;
  }

  double get_double(const std::string& key, double fallback) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    return to_double(it->second.value, it->second.line, key);
  }

  long get_int(const std::string& key, long fallback) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    const std::string& v = it->second.value;
    char* end = nullptr;
    long out = std::strtol(v.c_str(), &end, 10);
    if (v.empty() || *end != '\0')
      throw ConfigParseError(it->second.line, "key '" + key + "' expects an integer, got '" + v + "'");
    return out;
  }

  /// Comma-separated reals; entries may be written as fractions "1/8".
  std::vector<double> get_list(const std::string& key, std::vector<double> fallback) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    std::vector<double> out;
    for (const auto& item : detail::split(it->second.value, ','))
      out.push_back(to_double(item, it->second.line, key));
    return out;
  }

  int line_of(const std::string& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? 0 : it->second.line;
  }

  const std::map<std::string, Entry>& entries() const { return entries_; }

  static double to_double(const std::string& v, int line, const std::string& key) {
    auto slash = v.find('/');
    if (slash != std::string::npos) {
      double num = to_double(detail::trim(std::string_view(v).substr(0, slash)), line, key);
      double den = to_double(detail::trim(std::string_view(v).substr(slash + 1)), line, key);
      if (den == 0.0) throw ConfigParseError(line, "key '" + key + "': zero denominator");
      return num / den;
    }
    char* end = nullptr;
    double out = std::strtod(v.c_str(), &end);
    if (v.empty() || *end != '\0')
      throw ConfigParseError(line, "key '" + key + "' expects a number, got '" + v + "'");
    return out;
  }

 private:
  std::map<std::string, Entry> entries_;
};

}  // namespace hjhom
