#pragma once

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "compnet/common.hpp"
#include "compnet/model.hpp"

namespace compnet {

/// Flat `key = value` configuration: a UTF-8 text file (blank lines and
/// #-comments allowed) plus command-line overrides. Unknown keys are
/// errors so typos cannot silently change a run.
class RunConfig {
 public:
  static RunConfig load(const std::string& path,
                        const std::vector<std::string>& overrides,
                        const std::set<std::string>& allowed) {
    RunConfig cfg;
    cfg.allowed_ = allowed;
    if (!path.empty()) {
      std::ifstream f(path);
      if (!f) throw ConfigError("cannot open config file " + path);
      std::string line;
      int lineno = 0;
      while (std::getline(f, line)) {
        ++lineno;
        cfg.parse_line(line, path + ":" + std::to_string(lineno));
      }
    }
    for (const auto& ov : overrides) cfg.parse_line(ov, "--set " + ov);
    return cfg;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string str(const std::string& key, const std::string& dflt) const {
    auto it = values_.find(key);
    return it == values_.end() ? dflt : it->second;
  }

  std::string require(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing required key: " + key);
    return it->second;
  }

  int64_t i64(const std::string& key, int64_t dflt) const {
    auto it = values_.find(key);
    if (it == values_.end()) return dflt;
    try {
      return std::stoll(it->second);
    } catch (...) {
      throw ConfigError("key " + key + ": expected integer, got '" + it->second + "'");
    }
  }

  uint64_t u64(const std::string& key, uint64_t dflt) const {
    auto it = values_.find(key);
    if (it == values_.end()) return dflt;
    try {
      return std::stoull(it->second);
    } catch (...) {
      throw ConfigError("key " + key + ": expected integer, got '" + it->second + "'");
    }
  }

  double f64(const std::string& key, double dflt) const {
    auto it = values_.find(key);
    if (it == values_.end()) return dflt;
    try {
      return std::stod(it->second);
    } catch (...) {
      throw ConfigError("key " + key + ": expected number, got '" + it->second + "'");
    }
  }

  void set(const std::string& key, const std::string& value) {
    check_known(key);
    values_[key] = value;
  }

  /// Fully resolved `key = value` text, sorted by key.
  std::string resolved() const {
    std::ostringstream os;
    for (const auto& [k, v] : values_) os << k << " = " << v << "\n";
    return os.str();
  }

  ModelConfig model_config() const {
    ModelConfig m;
    m.channels = i64("model.channels", m.channels);
    m.event_bins = i64("model.event_bins", m.event_bins);
    m.levels = i64("model.levels", m.levels);
    m.blocks = i64("model.blocks", m.blocks);
    m.fusion = str("model.fusion", m.fusion);
    m.temporal = str("model.temporal", m.temporal);
    m.freq_branch = str("model.freq_branch", m.freq_branch);
    m.cln = str("model.cln", m.cln);
    m.seed = u64("model.seed", m.seed);
    m.validate();
    return m;
  }

  static const std::set<std::string>& model_keys() {
    static const std::set<std::string> keys = {
        "model.channels", "model.event_bins", "model.levels",
        "model.blocks",   "model.fusion",     "model.temporal",
        "model.freq_branch", "model.cln",     "model.seed"};
    return keys;
  }

 private:
  void parse_line(const std::string& line, const std::string& where) {
    auto trim = [](std::string s) {
      size_t a = s.find_first_not_of(" \t");
      size_t b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') return;
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(where + ": expected 'key = value'");
    std::string key = trim(t.substr(0, eq)), value = trim(t.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    check_known(key);
    values_[key] = value;
  }

  void check_known(const std::string& key) const {
    if (!allowed_.empty() && !allowed_.count(key))
      throw ConfigError("unknown config key: " + key);
  }

  std::map<std::string, std::string> values_;
  std::set<std::string> allowed_;
};

}  // namespace compnet
