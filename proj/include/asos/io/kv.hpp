#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "asos/common.hpp"

namespace asos::io {

/// Key-value text config: one `key = value` per line, `#` starts a comment.
/// Lookups that parse a value throw ConfigError naming the key on bad input.
class KvConfig {
 public:
  KvConfig() = default;

  static KvConfig from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path);
    KvConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
      ++lineno;
      auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError(path + ":" + std::to_string(lineno) +
                          ": expected 'key = value'");
      cfg.values_[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return cfg;
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& dflt) const {
    auto it = values_.find(key);
    return it == values_.end() ? dflt : it->second;
  }

  double get_real(const std::string& key, double dflt) const {
    auto it = values_.find(key);
    if (it == values_.end()) return dflt;
    try {
      std::size_t pos = 0;
      double v = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "' is not a number: '" +
                        it->second + "'");
    }
  }

  long get_int(const std::string& key, long dflt) const {
    auto it = values_.find(key);
    if (it == values_.end()) return dflt;
    try {
      std::size_t pos = 0;
      long v = std::stol(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "' is not an integer: '" +
                        it->second + "'");
    }
  }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  static std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  }

  std::map<std::string, std::string> values_;
};

}  // namespace asos::io
