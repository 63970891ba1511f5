#include "qsat/config.hpp"

#include <cmath>
#include <fstream>

#include "qsat/errors.hpp"

namespace qsat::config {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

Config Config::parse(std::istream& in, const std::string& source) {
  Config cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError(source + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ValidationError(source + ":" + std::to_string(line_no) + ": empty key");
    cfg.set(key, trim(line.substr(eq + 1)));
  }
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path);
  return parse(in, path);
}

void Config::set(const std::string& key, const std::string& value) { values_[key] = value; }

std::string Config::text(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double Config::number(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(it->second, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != it->second.size() || !std::isfinite(v)) {
    throw ValidationError("config key '" + key + "' expects a number, got '" + it->second + "'");
  }
  return v;
}

int Config::integer(const std::string& key, int fallback) const {
  const double v = number(key, fallback);
  if (v != std::floor(v)) throw ValidationError("config key '" + key + "' expects an integer");
  return static_cast<int>(v);
}

bool Config::flag(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const auto& v = it->second;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ValidationError("config key '" + key + "' expects true/false, got '" + v + "'");
}

}  // namespace qsat::config
