#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "psi/infomax.hpp"

using namespace psi;
using ad::Matrix;

namespace {

using LocalEdges = std::vector<std::pair<std::uint32_t, std::uint32_t>>;

SubgraphView ring_view(std::size_t n) {
  SubgraphView v;
  for (NodeId i = 0; i < n; ++i) v.nodes.push_back(100 + i);
  for (NodeId i = 0; i < n; ++i) {
    v.edges.push_back({100 + i, 100 + (i + 1) % n});
    v.edges.push_back({100 + (i + 1) % n, 100 + i});
  }
  return v;
}

}  // namespace

TEST(Ppr, PathSymmetricMatchesReference) {
  // Reference: alpha (I - (1 - alpha) D^-1/2 (A + I) D^-1/2)^-1 on 0-1-2.
  const LocalEdges edges{{0, 1}, {1, 2}};
  const auto pi = ppr_matrix(3, edges);
  const Matrix want{{0.4443033957473818, 0.3039512819511973, 0.18343383052999054},
                    {0.30395128195119736, 0.5036496350364963, 0.30395128195119736},
                    {0.18343383052999054, 0.30395128195119736, 0.4443033957473819}};
  for (std::size_t i = 0; i < 9; ++i) EXPECT_NEAR(pi[i], want[i], 1e-12) << i;
}

TEST(Ppr, PathRowStochasticMatchesReferenceAndRowsSumToOne) {
  const LocalEdges edges{{1, 0}, {2, 1}};
  PprOptions o;
  o.normalization = PprNormalization::kRowStochastic;
  const auto pi = ppr_matrix(3, edges, o);
  const Matrix want{{0.44430339574738176, 0.37226277372262767, 0.1834338305299905},
                    {0.24817518248175177, 0.5036496350364963, 0.2481751824817518},
                    {0.18343383052999043, 0.37226277372262767, 0.44430339574738176}};
  for (std::size_t i = 0; i < 9; ++i) EXPECT_NEAR(pi[i], want[i], 1e-12) << i;
  for (std::size_t r = 0; r < 3; ++r) EXPECT_NEAR(pi(r, 0) + pi(r, 1) + pi(r, 2), 1.0, 1e-12);
}

TEST(Ppr, RowStochasticRowsSumToOneOnRandomGraphs) {
  Rng rng(1);
  std::bernoulli_distribution coin(0.3);
  PprOptions o;
  o.normalization = PprNormalization::kRowStochastic;
  o.alpha = 0.2;
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 5 + trial;
    LocalEdges edges;
    for (std::uint32_t a = 0; a < n; ++a) {
      for (std::uint32_t b = 0; b < n; ++b) {
        if (a != b && coin(rng)) edges.push_back({a, b});
      }
    }
    const auto pi = ppr_matrix(n, edges, o);
    for (std::size_t r = 0; r < n; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < n; ++c) {
        EXPECT_GE(pi(r, c), 0.0);
        s += pi(r, c);
      }
      EXPECT_NEAR(s, 1.0, 1e-10);
    }
  }
}

TEST(Ppr, SymmetricDefaultIsSymmetric) {
  const LocalEdges edges{{0, 1}, {1, 2}, {2, 3}, {3, 0}, {0, 2}};
  const auto pi = ppr_matrix(4, edges);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(pi(i, j), pi(j, i), 1e-14);
  }
}

TEST(Ppr, Validation) {
  PprOptions o;
  o.alpha = 1.0;
  EXPECT_THROW(ppr_matrix(2, {}, o), std::invalid_argument);
  o = {};
  o.dense_cap = 3;
  EXPECT_THROW(ppr_matrix(4, {}, o), std::invalid_argument);
  const LocalEdges bad{{0, 5}};
  EXPECT_THROW(ppr_matrix(2, bad), std::invalid_argument);
  EXPECT_EQ(ppr_matrix(0, {}).size(), 0u);
}

TEST(Ppr, DiffusionKeepsTopEntriesPerTarget) {
  const auto v = ring_view(8);
  PprOptions o;
  o.top_t = 3;
  const auto d = ppr_diffusion(v, o);
  EXPECT_EQ(d.nodes, v.nodes);
  EXPECT_EQ(d.edges.size(), 8u * 3u);
  ASSERT_EQ(d.weights.size(), d.edges.size());
  const auto pi = ppr_matrix(8, v.local().edges, o);
  for (std::size_t i = 0; i < 8; ++i) {
    std::set<NodeId> sources;
    for (std::size_t e = 0; e < d.edges.size(); ++e) {
      if (d.edges[e].dst == v.nodes[i]) sources.insert(d.edges[e].src);
    }
    // On a ring the self entry and the two ring neighbors dominate.
    EXPECT_EQ(sources, (std::set<NodeId>{v.nodes[i], v.nodes[(i + 1) % 8], v.nodes[(i + 7) % 8]}));
  }
  for (std::size_t e = 0; e < d.edges.size(); ++e) {
    const auto j = d.edges[e].src - 100, i = d.edges[e].dst - 100;
    EXPECT_EQ(d.weights[e], pi(i, j));
  }
  o.top_t = 0;
  EXPECT_THROW(ppr_diffusion(v, o), std::invalid_argument);
}

TEST(Augment, NodeDropKeepsInducedEdgesAndAtLeastOneNode) {
  const auto v = ring_view(10);
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const auto out = drop_nodes(v, 0.9, rng);
    ASSERT_GE(out.nodes.size(), 1u);
    std::set<NodeId> kept(out.nodes.begin(), out.nodes.end());
    for (const auto& e : out.edges) {
      EXPECT_TRUE(kept.contains(e.src) && kept.contains(e.dst));
      EXPECT_NE(std::find(v.edges.begin(), v.edges.end(), e), v.edges.end());
    }
    EXPECT_TRUE(std::is_sorted(out.nodes.begin(), out.nodes.end()));
  }
  EXPECT_EQ(drop_nodes(v, 0.0, rng).nodes, v.nodes);
}

TEST(Augment, EdgePerturbKeepsNodesAndAvoidsDuplicates) {
  const auto v = ring_view(12);
  Rng rng(3);
  double total = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto out = perturb_edges(v, 0.3, rng);
    EXPECT_EQ(out.nodes, v.nodes);
    std::set<Edge> uniq(out.edges.begin(), out.edges.end());
    EXPECT_EQ(uniq.size(), out.edges.size());
    for (const auto& e : out.edges) EXPECT_NE(e.src, e.dst);
    total += static_cast<double>(out.edges.size());
  }
  EXPECT_NEAR(total / 200.0, static_cast<double>(v.edges.size()), 1.5);
}

TEST(Augment, AttributeMaskOnlyMarks) {
  const auto v = ring_view(30);
  Rng rng(4);
  const auto out = mask_attributes(v, 0.5, rng);
  EXPECT_EQ(out.nodes, v.nodes);
  EXPECT_EQ(out.edges, v.edges);
  ASSERT_EQ(out.masked.size(), 30u);
  const auto n = std::count(out.masked.begin(), out.masked.end(), 1);
  EXPECT_GT(n, 5);
  EXPECT_LT(n, 25);
  // Masks compose: a masked node stays masked.
  const auto again = mask_attributes(out, 0.5, rng);
  for (std::size_t i = 0; i < 30; ++i) {
    if (out.masked[i]) EXPECT_EQ(again.masked[i], 1);
  }
}

TEST(Augment, ProbabilityValidationAndDispatch) {
  const auto v = ring_view(5);
  Rng rng(5);
  EXPECT_THROW(drop_nodes(v, 1.0, rng), std::invalid_argument);
  EXPECT_THROW(perturb_edges(v, -0.1, rng), std::invalid_argument);
  Augmentor aug;
  aug.kind = AugmentKind::kAttrMask;
  aug.p = 1.5;
  EXPECT_THROW(aug.apply(v, rng), std::invalid_argument);
  aug.kind = AugmentKind::kPpr;
  aug.ppr.top_t = 2;
  EXPECT_EQ(aug.apply(v, rng).edges.size(), 10u);
}

TEST(Augment, DeterministicForSeed) {
  const auto v = ring_view(15);
  Rng a(9), b(9);
  const auto x = perturb_edges(drop_nodes(v, 0.3, a), 0.3, a);
  const auto y = perturb_edges(drop_nodes(v, 0.3, b), 0.3, b);
  EXPECT_EQ(x.nodes, y.nodes);
  EXPECT_EQ(x.edges, y.edges);
}
