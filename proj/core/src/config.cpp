#include "psi/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <stdexcept>

#include "psi/graph_io.hpp"

namespace psi {

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto comma = s.find(',', start);
    if (comma == std::string::npos) comma = s.size();
    auto item = trim(std::string_view(s).substr(start, comma - start));
    if (!item.empty()) out.push_back(item);
    start = comma + 1;
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw std::invalid_argument("config key '" + key + "': cannot parse '" + text + "' as a number");
  }
  return value;
}

double parse_double(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text.empty()) {
    throw std::invalid_argument("config key '" + key + "': cannot parse '" + text + "' as a number");
  }
  return v;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::istream& in, const std::string& source) {
  KeyValueConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ParseError(source, line_no, "expected 'key = value'");
    auto key = trim(std::string_view(text).substr(0, eq));
    if (key.empty()) throw ParseError(source, line_no, "empty key");
    cfg.values_[key] = trim(std::string_view(text).substr(eq + 1));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  return parse(in, path.string());
}

void KeyValueConfig::set(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw std::invalid_argument("override '" + std::string(assignment) + "' is not key=value");
  }
  auto key = trim(assignment.substr(0, eq));
  if (key.empty()) throw std::invalid_argument("override has an empty key");
  values_[key] = trim(assignment.substr(eq + 1));
}

std::optional<std::string> KeyValueConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  used_.insert(key);
  return it->second;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  return get(key).value_or(fallback);
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  auto v = get(key);
  return v ? parse_double(key, *v) : fallback;
}

std::int64_t KeyValueConfig::get_int(const std::string& key, std::int64_t fallback) const {
  auto v = get(key);
  return v ? parse_number<std::int64_t>(key, *v) : fallback;
}

std::uint64_t KeyValueConfig::get_uint(const std::string& key, std::uint64_t fallback) const {
  auto v = get(key);
  return v ? parse_number<std::uint64_t>(key, *v) : fallback;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  std::string s = *v;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw std::invalid_argument("config key '" + key + "': '" + *v + "' is not a boolean");
}

std::vector<double> KeyValueConfig::get_doubles(const std::string& key, std::vector<double> fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  std::vector<double> out;
  for (const auto& item : split_list(*v)) out.push_back(parse_double(key, item));
  return out;
}

std::vector<std::uint64_t> KeyValueConfig::get_uints(const std::string& key,
                                                     std::vector<std::uint64_t> fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  std::vector<std::uint64_t> out;
  for (const auto& item : split_list(*v)) out.push_back(parse_number<std::uint64_t>(key, item));
  return out;
}

std::vector<std::string> KeyValueConfig::unused_keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_) {
    if (!used_.contains(k)) out.push_back(k);
  }
  return out;
}

}  // namespace psi
