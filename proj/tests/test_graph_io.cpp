#include <gtest/gtest.h>

#include <sstream>

#include "psi/graph_io.hpp"

using namespace psi;

TEST(EdgeList, ParsesAndSkipsComments) {
  std::istringstream in("# header\n0 1\n\n2\t3\n  4 5  \n");
  EXPECT_EQ(read_edge_list(in), (std::vector<Edge>{{0, 1}, {2, 3}, {4, 5}}));
}

TEST(EdgeList, RoundTrip) {
  const std::vector<Edge> edges{{0, 1}, {5, 2}, {3, 3}};
  std::stringstream s;
  write_edge_list(s, edges);
  EXPECT_EQ(read_edge_list(s), edges);
}

TEST(EdgeList, MalformedLinesReportLineNumber) {
  for (const char* text : {"0 1\n1\n", "0 1\n1 x\n", "0 1\n1 2 3\n", "0 1\n-1 2\n"}) {
    std::istringstream in(text);
    try {
      read_edge_list(in, "edges.txt");
      FAIL() << "no error for: " << text;
    } catch (const ParseError& e) {
      EXPECT_EQ(e.line(), 2u) << text;
      EXPECT_NE(std::string(e.what()).find("edges.txt"), std::string::npos);
    }
  }
}

TEST(Subgraphs, NativeLayout) {
  std::istringstream in("1\t4,2,9\nB\t0,1\n");
  const auto subs = read_subgraphs(in);
  ASSERT_EQ(subs.size(), 2u);
  EXPECT_EQ(subs[0].ids, (std::vector<NodeId>{4, 2, 9}));
  EXPECT_EQ(subs[0].label, "1");
  EXPECT_FALSE(subs[0].split);
  EXPECT_EQ(subs[1].label, "B");
  EXPECT_EQ(subs[1].line, 2u);
}

TEST(Subgraphs, ThreeColumnLayoutWithSplits) {
  std::istringstream in("4-2-9\tMetab\ttrain\n0-1\tOther\ttest\n");
  const auto subs = read_subgraphs(in);
  ASSERT_EQ(subs.size(), 2u);
  EXPECT_EQ(subs[0].ids, (std::vector<NodeId>{4, 2, 9}));
  EXPECT_EQ(subs[0].label, "Metab");
  ASSERT_TRUE(subs[1].split);
  EXPECT_EQ(*subs[1].split, "test");
}

TEST(Subgraphs, Malformed) {
  for (const char* text : {"1\t\n", "1\t3,,4\n", "no-tab-here\n", "1\t2,a\n"}) {
    std::istringstream in(text);
    EXPECT_THROW(read_subgraphs(in), ParseError) << text;
  }
}

TEST(Subgraphs, WriteKeepsObservationOrder) {
  SubgraphRecord r;
  r.node_ids = {1, 2, 5};
  r.label = 3;
  r.observation_order = std::vector<NodeId>{5, 1, 2};
  std::stringstream s;
  write_subgraphs(s, std::vector<SubgraphRecord>{r});
  const auto subs = read_subgraphs(s);
  ASSERT_EQ(subs.size(), 1u);
  EXPECT_EQ(subs[0].ids, (std::vector<NodeId>{5, 1, 2}));
  EXPECT_EQ(subs[0].label, "3");
}
