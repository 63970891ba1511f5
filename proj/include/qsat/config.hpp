#pragma once

// Plain-text configuration: one "dotted.key = value" per line, '#' comments.

#include <istream>
#include <map>
#include <string>

namespace qsat::config {

class Config {
 public:
  static Config parse(std::istream& in, const std::string& source = "<input>");
  static Config load(const std::string& path);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) > 0; }
  void erase(const std::string& key) { values_.erase(key); }

  std::string text(const std::string& key, const std::string& fallback) const;
  /// Throws ValidationError when the value is not a number.
  double number(const std::string& key, double fallback) const;
  int integer(const std::string& key, int fallback) const;
  bool flag(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace qsat::config
