#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

namespace depcon {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Key-value config with [section] headers and '#' comments. Every key must
// be consumed by a typed getter; leftovers are reported as errors so typos
// never pass silently.
class ConfigFile {
 public:
  ConfigFile() = default;

  static ConfigFile parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str(), path);
  }

  static ConfigFile parse_string(const std::string& text, const std::string& origin = "<string>") {
    ConfigFile cfg;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          throw ConfigError(origin + ":" + std::to_string(lineno) + ": malformed section header");
        section = trim(line.substr(1, line.size() - 2));
        if (section.empty())
          throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty section name");
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty())
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
      const std::string full = section + "." + key;
      if (cfg.values_.count(full))
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key " + full);
      cfg.values_[full] = value;
    }
    return cfg;
  }

  bool has(const std::string& section, const std::string& key) const {
    return values_.count(section + "." + key) > 0;
  }

  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) {
    const std::string full = section + "." + key;
    auto it = values_.find(full);
    if (it == values_.end()) return fallback;
    consumed_.insert(full);
    return it->second;
  }

  double get_double(const std::string& section, const std::string& key, double fallback) {
    const std::string full = section + "." + key;
    auto it = values_.find(full);
    if (it == values_.end()) return fallback;
    consumed_.insert(full);
    try {
      std::size_t pos = 0;
      const double v = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key " + full + " is not a number: " + it->second);
    }
  }

  long long get_int(const std::string& section, const std::string& key, long long fallback) {
    const std::string full = section + "." + key;
    auto it = values_.find(full);
    if (it == values_.end()) return fallback;
    consumed_.insert(full);
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key " + full + " is not an integer: " + it->second);
    }
  }

  std::uint64_t get_u64(const std::string& section, const std::string& key,
                        std::uint64_t fallback) {
    const std::string full = section + "." + key;
    auto it = values_.find(full);
    if (it == values_.end()) return fallback;
    consumed_.insert(full);
    try {
      std::size_t pos = 0;
      const std::uint64_t v = std::stoull(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key " + full + " is not an unsigned integer: " + it->second);
    }
  }

  // Call after all getters: unknown keys are config errors.
  void reject_unknown() const {
    std::string bad;
    for (const auto& [key, _] : values_)
      if (!consumed_.count(key)) bad += (bad.empty() ? "" : ", ") + key;
    if (!bad.empty()) throw ConfigError("unknown config keys: " + bad);
  }

 private:
  static std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
  }

  std::map<std::string, std::string> values_;
  std::set<std::string> consumed_;
};

}  // namespace depcon
