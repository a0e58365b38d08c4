#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace lobqueue {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Allowed keys per section. Sections are named after the engines.
inline const std::map<std::string, std::set<std::string>>& config_schema() {
  static const std::map<std::string, std::set<std::string>> schema = {
      {"run", {"command", "seed", "out", "workers", "suite"}},
      {"point_processes", {"kind", "lambda", "nu", "a", "b", "rho", "kappa", "delta", "alpha", "beta", "horizon",
                           "cox_variance"}},
      {"order_flow", {"vbar", "p", "laws", "size", "sigma", "convention"}},
      {"lob_simulator", {"n", "qb", "qa", "z", "horizon", "paths", "continue_after_stop", "flows"}},
      {"fluid_engine", {"lambda", "vbar", "qb", "qa", "z", "points", "t_end"}},
      {"diffusion_engine", {"mu", "sigma1", "sigma2", "rho", "qb", "qa", "derive", "survival_times", "sigma_y_times",
                            "variance_mode", "paths", "t_max"}},
      {"ldp_engine", {"mode", "lambda", "x", "y", "times", "fb", "fa", "qb", "qa", "t"}},
      {"verify_harness", {"suite", "scale"}},
      {"example1", {"n", "paths"}},
  };
  return schema;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline nlohmann::json parse_scalar(const std::string& raw) {
  const std::string v = trim(raw);
  if (v == "true") return true;
  if (v == "false") return false;
  if (!v.empty()) {
    std::size_t used = 0;
    try {
      const double d = std::stod(v, &used);
      if (used == v.size()) return d;
    } catch (const std::exception&) {
    }
  }
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
  return v;
}

inline nlohmann::json parse_value(const std::string& raw) {
  if (raw.find(',') == std::string::npos) return parse_scalar(raw);
  nlohmann::json arr = nlohmann::json::array();
  std::stringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ',')) arr.push_back(parse_scalar(item));
  return arr;
}

inline void check_known(const std::string& section, const std::string& key, const std::string& where) {
  const auto& schema = config_schema();
  const auto it = schema.find(section);
  if (it == schema.end()) throw ConfigError(where + ": unknown section [" + section + "]");
  if (!it->second.count(key)) throw ConfigError(where + ": unknown key '" + key + "' in [" + section + "]");
}

}  // namespace detail

/// Parses `key = value` lines grouped under `[section]` headers. `#` and `;`
/// start comments. Comma-separated values become arrays.
inline nlohmann::json parse_ini(const std::string& text) {
  nlohmann::json out = nlohmann::json::object();
  std::stringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": unterminated section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      if (!config_schema().count(section)) throw ConfigError(where + ": unknown section [" + section + "]");
      if (!out.contains(section)) out[section] = nlohmann::json::object();
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    if (section.empty()) throw ConfigError(where + ": key outside any section");
    const std::string key = detail::trim(line.substr(0, eq));
    detail::check_known(section, key, where);
    if (out[section].contains(key)) throw ConfigError(where + ": duplicate key '" + key + "'");
    out[section][key] = detail::parse_value(line.substr(eq + 1));
  }
  return out;
}

/// Same schema check for a JSON document of the form {section: {key: value}}.
inline nlohmann::json check_json_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  for (const auto& [section, body] : j.items()) {
    if (!body.is_object()) throw ConfigError("config: section '" + section + "' must be an object");
    for (const auto& [key, value] : body.items()) detail::check_known(section, key, "key " + section + "." + key);
  }
  return j;
}

inline nlohmann::json parse_config_text(const std::string& text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
    return check_json_config(j);
  }
  return parse_ini(text);
}

inline nlohmann::json load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

/// Typed access to one section with defaults.
class Section {
 public:
  Section(const nlohmann::json& root, std::string name)
      : name_(std::move(name)), body_(root.contains(name_) ? root.at(name_) : nlohmann::json::object()) {}

  bool present() const { return !body_.empty(); }
  bool has(const std::string& key) const { return body_.contains(key); }

  double number(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const auto& v = body_.at(key);
    if (!v.is_number()) throw ConfigError(name_ + "." + key + ": expected a number");
    return v.get<double>();
  }
  double number(const std::string& key) const {
    if (!has(key)) throw ConfigError(name_ + "." + key + ": required");
    return number(key, 0.0);
  }
  bool flag(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const auto& v = body_.at(key);
    if (!v.is_boolean()) throw ConfigError(name_ + "." + key + ": expected true or false");
    return v.get<bool>();
  }
  std::string text(const std::string& key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    const auto& v = body_.at(key);
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number()) return v.dump();
    throw ConfigError(name_ + "." + key + ": expected a string");
  }
  std::vector<double> numbers(const std::string& key, std::vector<double> fallback = {}) const {
    if (!has(key)) return fallback;
    const auto& v = body_.at(key);
    if (v.is_number()) return {v.get<double>()};
    if (!v.is_array()) throw ConfigError(name_ + "." + key + ": expected a list of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError(name_ + "." + key + ": expected a list of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }
  std::vector<std::string> texts(const std::string& key) const {
    if (!has(key)) return {};
    const auto& v = body_.at(key);
    if (v.is_string()) return {v.get<std::string>()};
    std::vector<std::string> out;
    for (const auto& e : v) {
      if (!e.is_string()) throw ConfigError(name_ + "." + key + ": expected a list of names");
      out.push_back(e.get<std::string>());
    }
    return out;
  }

 private:
  std::string name_;
  nlohmann::json body_;
};

/// JSON text with every floating-point number printed with 17 significant digits.
inline void write_json17(std::ostream& os, const nlohmann::json& j, int indent = 0) {
  const std::string pad(indent + 2, ' '), close(indent, ' ');
  switch (j.type()) {
    case nlohmann::json::value_t::object: {
      if (j.empty()) {
        os << "{}";
        return;
      }
      os << "{\n";
      bool first = true;
      for (const auto& [k, v] : j.items()) {
        if (!first) os << ",\n";
        first = false;
        os << pad << nlohmann::json(k).dump() << ": ";
        write_json17(os, v, indent + 2);
      }
      os << "\n" << close << "}";
      return;
    }
    case nlohmann::json::value_t::array: {
      os << "[";
      bool first = true;
      for (const auto& v : j) {
        if (!first) os << ", ";
        first = false;
        write_json17(os, v, indent + 2);
      }
      os << "]";
      return;
    }
    case nlohmann::json::value_t::number_float: {
      const double d = j.get<double>();
      if (!std::isfinite(d)) {
        os << "null";
        return;
      }
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", d);
      os << buf;
      return;
    }
    default:
      os << j.dump();
  }
}

inline std::string json17(const nlohmann::json& j) {
  std::ostringstream os;
  write_json17(os, j);
  os << "\n";
  return os.str();
}

}  // namespace lobqueue
