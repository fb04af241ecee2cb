#include "psi/graph.hpp"

#include <algorithm>
#include <iterator>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>

namespace psi {

namespace {

std::vector<NodeId> sorted_unique(std::span<const NodeId> ids) {
  std::vector<NodeId> out(ids.begin(), ids.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

bool contains_sorted(std::span<const NodeId> sorted, NodeId v) {
  return std::binary_search(sorted.begin(), sorted.end(), v);
}

std::vector<Edge> induced_edges(std::span<const Edge> edges, std::span<const NodeId> sorted_ids) {
  std::vector<Edge> out;
  for (const auto& e : edges) {
    if (contains_sorted(sorted_ids, e.src) && contains_sorted(sorted_ids, e.dst)) out.push_back(e);
  }
  return out;
}

}  // namespace

GlobalGraph::GlobalGraph(std::size_t num_nodes, std::vector<Edge> edges, bool symmetrize)
    : num_nodes_(num_nodes), edges_(std::move(edges)) {
  for (const auto& e : edges_) {
    if (e.src >= num_nodes_ || e.dst >= num_nodes_) {
      throw std::invalid_argument("edge (" + std::to_string(e.src) + ", " + std::to_string(e.dst) +
                                  ") out of range for " + std::to_string(num_nodes_) + " nodes");
    }
  }
  if (symmetrize) {
    const auto n = edges_.size();
    edges_.reserve(2 * n);
    for (std::size_t i = 0; i < n; ++i) edges_.push_back({edges_[i].dst, edges_[i].src});
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());

  out_offsets_.assign(num_nodes_ + 1, 0);
  in_offsets_.assign(num_nodes_ + 1, 0);
  for (const auto& e : edges_) {
    ++out_offsets_[e.src + 1];
    ++in_offsets_[e.dst + 1];
  }
  for (std::size_t v = 0; v < num_nodes_; ++v) {
    out_offsets_[v + 1] += out_offsets_[v];
    in_offsets_[v + 1] += in_offsets_[v];
  }
  out_targets_.resize(edges_.size());
  in_sources_.resize(edges_.size());
  std::vector<std::size_t> in_fill(in_offsets_.begin(), in_offsets_.end() - 1);
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    out_targets_[i] = edges_[i].dst;  // edges_ is sorted by src, so CSR order matches
    in_sources_[in_fill[edges_[i].dst]++] = edges_[i].src;
  }
  density_ = num_nodes_ < 2 ? 0.0
                            : static_cast<double>(edges_.size()) /
                                  (static_cast<double>(num_nodes_) * static_cast<double>(num_nodes_ - 1));
}

std::span<const NodeId> GlobalGraph::out_neighbors(NodeId v) const {
  if (v >= num_nodes_) throw std::out_of_range("node id " + std::to_string(v) + " out of range");
  return {out_targets_.data() + out_offsets_[v], out_offsets_[v + 1] - out_offsets_[v]};
}

std::span<const NodeId> GlobalGraph::in_neighbors(NodeId v) const {
  if (v >= num_nodes_) throw std::out_of_range("node id " + std::to_string(v) + " out of range");
  return {in_sources_.data() + in_offsets_[v], in_offsets_[v + 1] - in_offsets_[v]};
}

bool GlobalGraph::has_edge(NodeId src, NodeId dst) const {
  if (src >= num_nodes_) return false;
  auto nbrs = out_neighbors(src);
  return std::binary_search(nbrs.begin(), nbrs.end(), dst);
}

std::vector<Edge> GlobalGraph::reversed_edges() const {
  std::vector<Edge> out;
  out.reserve(edges_.size());
  for (const auto& e : edges_) out.push_back({e.dst, e.src});
  std::sort(out.begin(), out.end());
  return out;
}

SubgraphRecord make_record(const GlobalGraph& graph, std::span<const NodeId> ids, int label,
                           bool ordered) {
  SubgraphRecord rec;
  rec.node_ids = sorted_unique(ids);
  for (auto v : rec.node_ids) {
    if (v >= graph.num_nodes()) {
      throw std::invalid_argument("subgraph node id " + std::to_string(v) + " out of range");
    }
  }
  for (auto u : rec.node_ids) {
    for (auto v : graph.out_neighbors(u)) {
      if (contains_sorted(rec.node_ids, v)) rec.edge_pairs.push_back({u, v});
    }
  }
  rec.label = label;
  if (ordered) {
    std::vector<NodeId> order;
    std::unordered_set<NodeId> seen;
    for (auto v : ids) {
      if (seen.insert(v).second) order.push_back(v);
    }
    rec.observation_order = std::move(order);
  }
  return rec;
}

void validate_record(const GlobalGraph& graph, const SubgraphRecord& record) {
  if (!std::is_sorted(record.node_ids.begin(), record.node_ids.end()) ||
      std::adjacent_find(record.node_ids.begin(), record.node_ids.end()) != record.node_ids.end()) {
    throw std::invalid_argument("subgraph node_ids must be sorted and unique");
  }
  for (auto v : record.node_ids) {
    if (v >= graph.num_nodes()) {
      throw std::invalid_argument("subgraph node id " + std::to_string(v) + " out of range");
    }
  }
  for (const auto& e : record.edge_pairs) {
    if (!contains_sorted(record.node_ids, e.src) || !contains_sorted(record.node_ids, e.dst)) {
      throw std::invalid_argument("subgraph edge endpoint outside node_ids");
    }
    if (!graph.has_edge(e.src, e.dst)) {
      throw std::invalid_argument("subgraph edge (" + std::to_string(e.src) + ", " +
                                  std::to_string(e.dst) + ") not in the global graph");
    }
  }
  if (record.observation_order) {
    auto order = *record.observation_order;
    std::sort(order.begin(), order.end());
    if (order != record.node_ids) {
      throw std::invalid_argument("observation_order is not a permutation of node_ids");
    }
  }
}

PartialSubgraph induced_partial_subgraph(const SubgraphRecord& subgraph,
                                         std::span<const NodeId> observed,
                                         std::size_t parent_index) {
  return induced_partial_subgraph(subgraph, observed, parent_index, EdgeSource::kSubgraph, nullptr);
}

PartialSubgraph induced_partial_subgraph(const SubgraphRecord& subgraph,
                                         std::span<const NodeId> observed,
                                         std::size_t parent_index, EdgeSource source,
                                         const GlobalGraph* graph) {
  if (observed.empty()) throw std::invalid_argument("observed node set is empty");
  PartialSubgraph out;
  out.parent_index = parent_index;
  std::unordered_set<NodeId> seen;
  for (auto v : observed) {
    if (!contains_sorted(subgraph.node_ids, v)) {
      throw std::invalid_argument("observed node " + std::to_string(v) + " is not in the subgraph");
    }
    if (seen.insert(v).second) out.observed_ids.push_back(v);
  }
  const auto sorted_obs = sorted_unique(out.observed_ids);
  if (source == EdgeSource::kGlobal) {
    if (graph == nullptr) throw std::invalid_argument("global edge source requires a graph");
    for (auto u : sorted_obs) {
      for (auto v : graph->out_neighbors(u)) {
        if (contains_sorted(sorted_obs, v)) out.observed_edges.push_back({u, v});
      }
    }
  } else {
    out.observed_edges = induced_edges(subgraph.edge_pairs, sorted_obs);
  }
  return out;
}

KhopPartition khop_neighbors(const GlobalGraph& graph, std::span<const NodeId> observed,
                             const KhopOptions& options, Rng& rng) {
  if (options.k < 1) throw std::invalid_argument("k must be >= 1");
  if (options.cap && *options.cap == 0) throw std::invalid_argument("neighborhood cap must be > 0");
  if (!(options.edge_drop >= 0.0 && options.edge_drop < 1.0)) {
    throw std::invalid_argument("edge drop probability must be in [0, 1)");
  }
  if (observed.empty()) throw std::invalid_argument("observed node set is empty");

  const auto n = graph.num_nodes();
  std::vector<int> dist(n, -1);
  std::vector<NodeId> frontier;
  for (auto v : observed) {
    if (v >= n) throw std::invalid_argument("observed node " + std::to_string(v) + " out of range");
    if (dist[v] < 0) {
      dist[v] = 0;
      frontier.push_back(v);
    }
  }
  const auto obs_sorted = sorted_unique(observed);

  KhopPartition out;
  for (int hop = 1; hop <= options.k && !frontier.empty(); ++hop) {
    std::vector<NodeId> next;
    auto visit = [&](NodeId w) {
      if (dist[w] < 0) {
        dist[w] = hop;
        next.push_back(w);
      }
    };
    for (auto v : frontier) {
      for (auto w : graph.out_neighbors(v)) visit(w);
      for (auto w : graph.in_neighbors(v)) visit(w);
    }
    out.neighbors.insert(out.neighbors.end(), next.begin(), next.end());
    frontier = std::move(next);
  }
  std::sort(out.neighbors.begin(), out.neighbors.end());

  if (options.cap && out.neighbors.size() > *options.cap) {
    std::vector<NodeId> kept;
    kept.reserve(*options.cap);
    std::sample(out.neighbors.begin(), out.neighbors.end(), std::back_inserter(kept), *options.cap, rng);
    out.neighbors = std::move(kept);
  }

  std::vector<NodeId> members;
  members.reserve(obs_sorted.size() + out.neighbors.size());
  std::merge(obs_sorted.begin(), obs_sorted.end(), out.neighbors.begin(), out.neighbors.end(),
             std::back_inserter(members));
  std::bernoulli_distribution drop(options.edge_drop);
  for (auto u : members) {
    for (auto v : graph.out_neighbors(u)) {
      if (!contains_sorted(members, v)) continue;
      if (options.edge_drop > 0.0 && drop(rng)) continue;
      out.edges_khop.push_back({u, v});
    }
  }
  return out;
}

NeighborSplit partition_khop(std::span<const NodeId> neighbors, const SubgraphRecord& subgraph) {
  auto nb = sorted_unique(neighbors);
  NeighborSplit out;
  std::set_intersection(nb.begin(), nb.end(), subgraph.node_ids.begin(), subgraph.node_ids.end(),
                        std::back_inserter(out.in_subgraph));
  std::set_difference(nb.begin(), nb.end(), subgraph.node_ids.begin(), subgraph.node_ids.end(),
                      std::back_inserter(out.outside));
  return out;
}

KhopPartition khop_partition(const GlobalGraph& graph, const SubgraphRecord& subgraph,
                             std::span<const NodeId> observed, const KhopOptions& options,
                             Rng& rng) {
  auto part = khop_neighbors(graph, observed, options, rng);
  auto split = partition_khop(part.neighbors, subgraph);
  part.in_subgraph = std::move(split.in_subgraph);
  part.outside = std::move(split.outside);
  return part;
}

LocalGraph make_local_graph(std::span<const NodeId> nodes, std::span<const Edge> edges,
                            std::span<const double> weights) {
  if (!weights.empty() && weights.size() != edges.size()) {
    throw std::invalid_argument("edge weight count does not match edge count");
  }
  LocalGraph g;
  g.nodes.assign(nodes.begin(), nodes.end());
  std::unordered_map<NodeId, std::uint32_t> index;
  index.reserve(nodes.size() * 2);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!index.emplace(nodes[i], static_cast<std::uint32_t>(i)).second) {
      throw std::invalid_argument("duplicate node id " + std::to_string(nodes[i]) + " in local graph");
    }
  }
  g.edges.reserve(edges.size());
  for (const auto& e : edges) {
    auto s = index.find(e.src);
    auto d = index.find(e.dst);
    if (s == index.end() || d == index.end()) {
      throw std::invalid_argument("edge (" + std::to_string(e.src) + ", " + std::to_string(e.dst) +
                                  ") references a node outside the encoded node set");
    }
    g.edges.emplace_back(s->second, d->second);
  }
  g.weights.assign(weights.begin(), weights.end());
  return g;
}

}  // namespace psi
