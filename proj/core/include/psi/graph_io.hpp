#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "psi/graph.hpp"

namespace psi {

/// Malformed input file. `line()` is 1-based; 0 when not line-specific.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// "src dst" per line; blank lines and lines starting with '#' are skipped.
std::vector<Edge> read_edge_list(std::istream& in, const std::string& source = "<edges>");
std::vector<Edge> read_edge_list(const std::filesystem::path& path);
void write_edge_list(std::ostream& out, std::span<const Edge> edges);

/// One parsed subgraph line before it is bound to a global graph.
struct RawSubgraph {
  std::vector<NodeId> ids;   // file order (= observation order for ordered data)
  std::string label;         // raw label text
  std::optional<std::string> split;  // only present in the three-column format
  std::size_t line = 0;
};

/// Accepts two layouts, detected per line:
///   "label<TAB>id,id,id"             (native)
///   "id-id-id<TAB>label<TAB>split"   (three-column layout with split tags)
std::vector<RawSubgraph> read_subgraphs(std::istream& in, const std::string& source = "<subgraphs>");
std::vector<RawSubgraph> read_subgraphs(const std::filesystem::path& path);

/// Native layout; ids written in observation order when present.
void write_subgraphs(std::ostream& out, std::span<const SubgraphRecord> records);

}  // namespace psi
