#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace psi {

/// Plain-text "key = value" settings. Blank lines and lines starting with
/// '#' are ignored; later assignments win. Every lookup marks the key as
/// used so unknown keys can be reported.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& in, const std::string& source = "<config>");
  static KeyValueConfig load(const std::filesystem::path& path);

  /// Applies one "key=value" override. Throws std::invalid_argument when
  /// there is no '='.
  void set(std::string_view assignment);
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  bool contains(const std::string& key) const { return values_.contains(key); }
  std::optional<std::string> get(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  /// Comma-separated list of numbers.
  std::vector<double> get_doubles(const std::string& key, std::vector<double> fallback) const;
  std::vector<std::uint64_t> get_uints(const std::string& key, std::vector<std::uint64_t> fallback) const;

  const std::map<std::string, std::string>& values() const { return values_; }
  /// Keys never read through a getter.
  std::vector<std::string> unused_keys() const;

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

}  // namespace psi
