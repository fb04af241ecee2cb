#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "psi/graph.hpp"
#include "psi/testing/oracles.hpp"

using namespace psi;

namespace {

GlobalGraph path_graph(std::size_t n) {
  std::vector<Edge> edges;
  for (NodeId i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1});
  return GlobalGraph(n, edges, true);
}

}  // namespace

TEST(GlobalGraph, SymmetrizesAndDeduplicates) {
  GlobalGraph g(4, {{0, 1}, {0, 1}, {1, 2}, {2, 1}, {3, 0}}, true);
  EXPECT_EQ(g.num_edges(), 6u);
  EXPECT_TRUE(g.has_edge(1, 0));
  EXPECT_TRUE(g.has_edge(0, 3));
  EXPECT_FALSE(g.has_edge(0, 2));
  EXPECT_TRUE(std::is_sorted(g.edges().begin(), g.edges().end()));
  EXPECT_DOUBLE_EQ(g.density(), 6.0 / 12.0);
}

TEST(GlobalGraph, DirectedNeighbors) {
  GlobalGraph g(3, {{0, 1}, {0, 2}, {2, 1}});
  EXPECT_EQ(std::vector<NodeId>(g.out_neighbors(0).begin(), g.out_neighbors(0).end()),
            (std::vector<NodeId>{1, 2}));
  EXPECT_EQ(std::vector<NodeId>(g.in_neighbors(1).begin(), g.in_neighbors(1).end()),
            (std::vector<NodeId>{0, 2}));
  EXPECT_TRUE(g.out_neighbors(1).empty());
  const auto rev = g.reversed_edges();
  EXPECT_EQ(rev, (std::vector<Edge>{{1, 0}, {1, 2}, {2, 0}}));
}

TEST(GlobalGraph, RejectsOutOfRangeEndpoints) {
  EXPECT_THROW(GlobalGraph(2, {{0, 2}}), std::invalid_argument);
}

TEST(GlobalGraph, EmptyAndSingletonDensity) {
  EXPECT_EQ(GlobalGraph(1, {}).density(), 0.0);
  EXPECT_EQ(GlobalGraph(0, {}).num_nodes(), 0u);
}

TEST(SubgraphRecord, MakeRecordInducesEdges) {
  const auto g = path_graph(5);
  const std::vector<NodeId> ids{3, 1, 2};
  const auto r = make_record(g, ids, 1, true);
  EXPECT_EQ(r.node_ids, (std::vector<NodeId>{1, 2, 3}));
  EXPECT_EQ(r.edge_pairs, (std::vector<Edge>{{1, 2}, {2, 1}, {2, 3}, {3, 2}}));
  ASSERT_TRUE(r.observation_order);
  EXPECT_EQ(*r.observation_order, ids);
  EXPECT_NO_THROW(validate_record(g, r));
}

TEST(SubgraphRecord, ValidateCatchesViolations) {
  const auto g = path_graph(5);
  auto r = make_record(g, std::vector<NodeId>{0, 1, 2}, 0);
  auto bad = r;
  bad.node_ids = {0, 1};
  EXPECT_THROW(validate_record(g, bad), std::invalid_argument);  // edge endpoint outside the node set
  bad = r;
  bad.node_ids = {0, 1, 1, 2};
  EXPECT_THROW(validate_record(g, bad), std::invalid_argument);
  bad = r;
  bad.edge_pairs.push_back({0, 2});
  std::sort(bad.edge_pairs.begin(), bad.edge_pairs.end());
  EXPECT_THROW(validate_record(g, bad), std::invalid_argument);  // not a global edge
}

TEST(PartialSubgraph, InducedEdgesOnly) {
  const auto g = path_graph(6);
  const auto r = make_record(g, std::vector<NodeId>{0, 1, 2, 3, 4}, 0);
  const std::vector<NodeId> obs{3, 1, 2};
  const auto p = induced_partial_subgraph(r, obs, 7);
  EXPECT_EQ(p.observed_ids, obs);
  EXPECT_EQ(p.parent_index, 7u);
  EXPECT_EQ(p.observed_edges, (std::vector<Edge>{{1, 2}, {2, 1}, {2, 3}, {3, 2}}));
  for (const auto& e : p.observed_edges) {
    EXPECT_TRUE(std::binary_search(r.edge_pairs.begin(), r.edge_pairs.end(), e));
  }
}

TEST(PartialSubgraph, CollapsesDuplicatesAndRejectsBadIds) {
  const auto g = path_graph(6);
  const auto r = make_record(g, std::vector<NodeId>{0, 1, 2}, 0);
  const auto p = induced_partial_subgraph(r, std::vector<NodeId>{2, 0, 2});
  EXPECT_EQ(p.observed_ids, (std::vector<NodeId>{2, 0}));
  EXPECT_THROW(induced_partial_subgraph(r, std::vector<NodeId>{}), std::invalid_argument);
  EXPECT_THROW(induced_partial_subgraph(r, std::vector<NodeId>{5}), std::invalid_argument);
}

TEST(PartialSubgraph, GlobalEdgeSource) {
  // The record omits edge 0-2 that the global graph has.
  GlobalGraph g(3, {{0, 1}, {1, 2}, {0, 2}}, true);
  SubgraphRecord r;
  r.node_ids = {0, 1, 2};
  r.edge_pairs = {{0, 1}, {1, 0}};
  const std::vector<NodeId> obs{0, 2};
  EXPECT_TRUE(induced_partial_subgraph(r, obs, 0, EdgeSource::kSubgraph, nullptr).observed_edges.empty());
  const auto p = induced_partial_subgraph(r, obs, 0, EdgeSource::kGlobal, &g);
  EXPECT_EQ(p.observed_edges, (std::vector<Edge>{{0, 2}, {2, 0}}));
  EXPECT_THROW(induced_partial_subgraph(r, obs, 0, EdgeSource::kGlobal, nullptr), std::invalid_argument);
}

TEST(Khop, PathGraphByHand) {
  const auto g = path_graph(7);
  Rng rng(1);
  KhopOptions o;
  o.k = 2;
  const std::vector<NodeId> obs{3};
  const auto p = khop_neighbors(g, obs, o, rng);
  EXPECT_EQ(p.neighbors, (std::vector<NodeId>{1, 2, 4, 5}));
  o.k = 1;
  EXPECT_EQ(khop_neighbors(g, obs, o, rng).neighbors, (std::vector<NodeId>{2, 4}));
}

TEST(Khop, FollowsEdgesInBothDirections) {
  GlobalGraph g(3, {{1, 0}, {0, 2}});
  Rng rng(1);
  const std::vector<NodeId> obs{0};
  EXPECT_EQ(khop_neighbors(g, obs, {}, rng).neighbors, (std::vector<NodeId>{1, 2}));
}

TEST(Khop, MatchesBfsOracleOnRandomGraphs) {
  const auto r = psi::testing::khop_oracle_check(60, 120, 42);
  EXPECT_TRUE(r.passed) << r.detail;
}

TEST(Khop, CapSubsamplesDeterministically) {
  Rng g_rng(3);
  const auto g = psi::testing::random_graph(200, 0.05, g_rng);
  KhopOptions o;
  o.k = 2;
  o.cap = 10;
  const std::vector<NodeId> obs{0, 1};
  Rng a(9), b(9);
  const auto pa = khop_neighbors(g, obs, o, a);
  const auto pb = khop_neighbors(g, obs, o, b);
  EXPECT_EQ(pa.neighbors.size(), 10u);
  EXPECT_EQ(pa.neighbors, pb.neighbors);
  const auto full = psi::testing::bfs_khop_oracle(g, obs, 2);
  for (auto v : pa.neighbors) EXPECT_TRUE(std::binary_search(full.begin(), full.end(), v));
}

TEST(Khop, EdgeDropKeepsSubsetOfEdges) {
  const auto g = path_graph(6);
  const std::vector<NodeId> obs{2};
  KhopOptions o;
  Rng rng(4);
  const auto full = khop_neighbors(g, obs, o, rng);
  ASSERT_FALSE(full.edges_khop.empty());
  o.edge_drop = 0.5;
  std::size_t kept = 0;
  for (int i = 0; i < 200; ++i) {
    const auto p = khop_neighbors(g, obs, o, rng);
    EXPECT_EQ(p.neighbors, full.neighbors);  // node set is unaffected
    for (const auto& e : p.edges_khop) {
      EXPECT_NE(std::find(full.edges_khop.begin(), full.edges_khop.end(), e), full.edges_khop.end());
    }
    kept += p.edges_khop.size();
  }
  const double rate = static_cast<double>(kept) / (200.0 * static_cast<double>(full.edges_khop.size()));
  EXPECT_NEAR(rate, 0.5, 0.08);
  o.edge_drop = 1.0;
  EXPECT_THROW(khop_neighbors(g, obs, o, rng), std::invalid_argument);
}

TEST(Khop, PartitionIsDisjointCover) {
  const auto g = path_graph(8);
  const auto rec = make_record(g, std::vector<NodeId>{2, 3, 4}, 0);
  Rng rng(1);
  KhopOptions o;
  o.k = 2;
  const std::vector<NodeId> obs{3};
  const auto p = khop_partition(g, rec, obs, o, rng);
  EXPECT_EQ(p.in_subgraph, (std::vector<NodeId>{2, 4}));
  EXPECT_EQ(p.outside, (std::vector<NodeId>{1, 5}));
  std::set<NodeId> all(p.in_subgraph.begin(), p.in_subgraph.end());
  all.insert(p.outside.begin(), p.outside.end());
  EXPECT_EQ(all.size(), p.neighbors.size());
  EXPECT_FALSE(all.contains(3));
}

TEST(LocalGraph, ReindexesAndValidates) {
  const std::vector<NodeId> nodes{7, 3, 9};
  const std::vector<Edge> edges{{3, 9}, {9, 7}};
  const auto lg = make_local_graph(nodes, edges);
  EXPECT_EQ(lg.size(), 3u);
  EXPECT_EQ(lg.edges, (std::vector<std::pair<std::uint32_t, std::uint32_t>>{{1, 2}, {2, 0}}));
  const std::vector<Edge> outside{{3, 4}};
  EXPECT_THROW(make_local_graph(nodes, outside), std::invalid_argument);
  const std::vector<NodeId> dup{1, 1};
  EXPECT_THROW(make_local_graph(dup, {}), std::invalid_argument);
}
