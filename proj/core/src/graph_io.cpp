#include "psi/graph_io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace psi {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

NodeId parse_id(std::string_view token, const std::string& source, std::size_t line) {
  NodeId value = 0;
  const auto* begin = token.data();
  const auto* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end || token.empty()) {
    throw ParseError(source, line, "invalid node id '" + std::string(token) + "'");
  }
  return value;
}

std::vector<NodeId> parse_id_list(std::string_view field, char sep, const std::string& source,
                                  std::size_t line) {
  std::vector<NodeId> ids;
  std::size_t start = 0;
  while (start <= field.size()) {
    auto pos = field.find(sep, start);
    if (pos == std::string_view::npos) pos = field.size();
    ids.push_back(parse_id(trim(field.substr(start, pos - start)), source, line));
    start = pos + 1;
  }
  return ids;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find('\t', start);
    fields.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return fields;
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

}  // namespace

ParseError::ParseError(const std::string& source, std::size_t line, const std::string& what)
    : std::runtime_error(source + (line ? ":" + std::to_string(line) : std::string()) + ": " + what),
      line_(line) {}

std::vector<Edge> read_edge_list(std::istream& in, const std::string& source) {
  std::vector<Edge> edges;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::istringstream ss(t);
    std::string a, b, extra;
    if (!(ss >> a >> b) || (ss >> extra)) {
      throw ParseError(source, lineno, "expected 'src dst'");
    }
    edges.push_back({parse_id(a, source, lineno), parse_id(b, source, lineno)});
  }
  return edges;
}

std::vector<Edge> read_edge_list(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return read_edge_list(in, path.string());
}

void write_edge_list(std::ostream& out, std::span<const Edge> edges) {
  for (const auto& e : edges) out << e.src << ' ' << e.dst << '\n';
}

std::vector<RawSubgraph> read_subgraphs(std::istream& in, const std::string& source) {
  std::vector<RawSubgraph> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split_tabs(line);
    RawSubgraph rec;
    rec.line = lineno;
    if (fields.size() == 2) {
      rec.label = trim(fields[0]);
      rec.ids = parse_id_list(trim(fields[1]), ',', source, lineno);
    } else if (fields.size() == 3) {
      rec.ids = parse_id_list(trim(fields[0]), '-', source, lineno);
      rec.label = trim(fields[1]);
      rec.split = trim(fields[2]);
    } else {
      throw ParseError(source, lineno, "expected 'label<TAB>ids' or 'ids<TAB>label<TAB>split'");
    }
    if (rec.label.empty()) throw ParseError(source, lineno, "empty label");
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<RawSubgraph> read_subgraphs(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return read_subgraphs(in, path.string());
}

void write_subgraphs(std::ostream& out, std::span<const SubgraphRecord> records) {
  for (const auto& rec : records) {
    out << rec.label << '\t';
    const auto& ids = rec.observation_order ? *rec.observation_order : rec.node_ids;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (i) out << ',';
      out << ids[i];
    }
    out << '\n';
  }
}

}  // namespace psi
