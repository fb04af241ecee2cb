#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "psi/random.hpp"

namespace psi {

using NodeId = std::uint32_t;

struct Edge {
  NodeId src = 0;
  NodeId dst = 0;

  auto operator<=>(const Edge&) const = default;
};

/// The shared global graph. Edges are stored directed, sorted and
/// de-duplicated; undirected inputs are symmetrized at construction.
/// Immutable after construction, so concurrent readers are safe.
class GlobalGraph {
 public:
  GlobalGraph() = default;
  GlobalGraph(std::size_t num_nodes, std::vector<Edge> edges, bool symmetrize = false);

  std::size_t num_nodes() const noexcept { return num_nodes_; }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  std::span<const Edge> edges() const noexcept { return edges_; }

  /// |E| / (n (n - 1)); zero for graphs with fewer than two nodes.
  double density() const noexcept { return density_; }

  std::span<const NodeId> out_neighbors(NodeId v) const;
  std::span<const NodeId> in_neighbors(NodeId v) const;
  bool has_edge(NodeId src, NodeId dst) const;

  /// Every edge with its direction flipped, sorted.
  std::vector<Edge> reversed_edges() const;

 private:
  std::size_t num_nodes_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::size_t> out_offsets_{0};
  std::vector<NodeId> out_targets_;
  std::vector<std::size_t> in_offsets_{0};
  std::vector<NodeId> in_sources_;
  double density_ = 0.0;
};

/// One labeled full subgraph S = (V^sub, A^sub).
struct SubgraphRecord {
  std::vector<NodeId> node_ids;  // sorted, unique
  std::vector<Edge> edge_pairs;  // sorted, unique
  int label = 0;
  std::optional<std::vector<double>> subgraph_feature;
  std::optional<std::vector<NodeId>> observation_order;
};

/// Builds a record whose edges are the global edges induced on `ids`.
/// When `ordered` is set, `ids` is kept as the observation order.
SubgraphRecord make_record(const GlobalGraph& graph, std::span<const NodeId> ids, int label,
                           bool ordered = false);

/// Throws std::invalid_argument when the record violates its invariants
/// against `graph`.
void validate_record(const GlobalGraph& graph, const SubgraphRecord& record);

struct PartialSubgraph {
  std::vector<NodeId> observed_ids;  // in observation (sampling) order
  std::vector<Edge> observed_edges;
  std::size_t parent_index = 0;
};

enum class EdgeSource {
  kSubgraph,  // A^obs = parent edges induced on V^obs
  kGlobal,    // A^obs = global edges induced on V^obs
};

/// Restricts `subgraph` to `observed`. Duplicate ids are collapsed, keeping
/// the first occurrence. Throws std::invalid_argument for an empty set or an
/// id outside the subgraph.
PartialSubgraph induced_partial_subgraph(const SubgraphRecord& subgraph,
                                         std::span<const NodeId> observed,
                                         std::size_t parent_index = 0);

/// Same as above with an explicit edge source; `graph` is required for
/// EdgeSource::kGlobal.
PartialSubgraph induced_partial_subgraph(const SubgraphRecord& subgraph,
                                         std::span<const NodeId> observed,
                                         std::size_t parent_index, EdgeSource source,
                                         const GlobalGraph* graph);

struct KhopOptions {
  int k = 1;
  std::optional<std::size_t> cap = 5000;  // nullopt = unbounded
  double edge_drop = 0.0;                  // p_d
};

struct KhopPartition {
  std::vector<NodeId> neighbors;     // N^k(V^obs) \ V^obs, sorted
  std::vector<NodeId> in_subgraph;   // V^sub_k
  std::vector<NodeId> outside;       // V^glob_k
  std::vector<Edge> edges_khop;      // edges among V^obs ∪ neighbors after drop
};

/// Nodes within k hops of `observed` (edges traversed in either direction),
/// excluding the observed nodes, optionally subsampled to `cap`, plus the
/// induced edges with independent edge dropout. `in_subgraph`/`outside` are
/// left empty; see partition_khop.
KhopPartition khop_neighbors(const GlobalGraph& graph, std::span<const NodeId> observed,
                             const KhopOptions& options, Rng& rng);

struct NeighborSplit {
  std::vector<NodeId> in_subgraph;
  std::vector<NodeId> outside;
};

NeighborSplit partition_khop(std::span<const NodeId> neighbors, const SubgraphRecord& subgraph);

/// khop_neighbors followed by partition_khop.
KhopPartition khop_partition(const GlobalGraph& graph, const SubgraphRecord& subgraph,
                             std::span<const NodeId> observed, const KhopOptions& options,
                             Rng& rng);

/// A subgraph re-indexed to local ids 0..n-1, ready for message passing.
/// Optional per-edge weights (empty = unit weights).
struct LocalGraph {
  std::vector<NodeId> nodes;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  std::vector<double> weights;

  std::size_t size() const noexcept { return nodes.size(); }
};

/// Throws std::invalid_argument when an edge endpoint is not in `nodes` or
/// `nodes` has duplicates.
LocalGraph make_local_graph(std::span<const NodeId> nodes, std::span<const Edge> edges,
                            std::span<const double> weights = {});

}  // namespace psi
