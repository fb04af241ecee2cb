#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "psi/graph_io.hpp"
#include "psi/protocols.hpp"

using namespace psi;

namespace {

SubgraphRecord record_of(std::size_t n, bool with_order = true) {
  SubgraphRecord r;
  for (NodeId i = 0; i < n; ++i) r.node_ids.push_back(10 + i);
  if (with_order) {
    std::vector<NodeId> order(r.node_ids.rbegin(), r.node_ids.rend());
    r.observation_order = order;
  }
  return r;
}

}  // namespace

TEST(Observation, ClampSize) {
  EXPECT_EQ(clamp_observed_size(-3, 10), 1u);
  EXPECT_EQ(clamp_observed_size(0, 10), 1u);
  EXPECT_EQ(clamp_observed_size(6, 10), 6u);
  EXPECT_EQ(clamp_observed_size(12, 10), 10u);
  EXPECT_EQ(clamp_observed_size(4, 0), 0u);
}

TEST(Observation, TrainJitterCoversFiveSizes) {
  const auto r = record_of(40);
  ObservationProtocol p;
  p.n_obs = 8;
  Rng rng(1);
  std::set<std::size_t> sizes;
  for (int i = 0; i < 1000; ++i) {
    const auto obs = sample_observed(r, p, Stage::kTrain, 0, rng);
    ASSERT_GE(obs.size(), 6u);
    ASSERT_LE(obs.size(), 10u);
    sizes.insert(obs.size());
    std::set<NodeId> uniq(obs.begin(), obs.end());
    EXPECT_EQ(uniq.size(), obs.size());
    for (auto v : obs) EXPECT_TRUE(std::binary_search(r.node_ids.begin(), r.node_ids.end(), v));
  }
  EXPECT_EQ(sizes, (std::set<std::size_t>{6, 7, 8, 9, 10}));
}

TEST(Observation, NoJitterAndEvalUseExactSize) {
  const auto r = record_of(20);
  ObservationProtocol p;
  p.n_obs = 5;
  p.train_jitter = false;
  Rng rng(2);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sample_observed(r, p, Stage::kTrain, 0, rng).size(), 5u);
  p.train_jitter = true;
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sample_observed(r, p, Stage::kTest, i, rng).size(), 5u);
}

TEST(Observation, SmallSubgraphClamps) {
  const auto r = record_of(3);
  ObservationProtocol p;
  p.n_obs = 8;
  Rng rng(3);
  EXPECT_EQ(sample_observed(r, p, Stage::kVal, 0, rng).size(), 3u);
}

TEST(Observation, OrderedTakesPrefix) {
  const auto r = record_of(12);
  ObservationProtocol p;
  p.n_obs = 4;
  p.ordered = true;
  Rng rng(4);
  for (auto stage : {Stage::kTrain, Stage::kVal, Stage::kTest}) {
    for (int i = 0; i < 20; ++i) {
      const auto obs = sample_observed(r, p, stage, 3, rng);
      EXPECT_TRUE(std::equal(obs.begin(), obs.end(), r.observation_order->begin()));
    }
  }
  EXPECT_THROW(sample_observed(record_of(5, false), p, Stage::kTrain, 0, rng), std::invalid_argument);
}

TEST(Observation, EvalSetsAreFrozen) {
  const auto r = record_of(30);
  ObservationProtocol p;
  p.n_obs = 6;
  p.eval_seed = 17;
  Rng a(1), b(999);
  const auto first = sample_observed(r, p, Stage::kTest, 4, a);
  // Consuming the train stream in between must not matter.
  for (int i = 0; i < 10; ++i) sample_observed(r, p, Stage::kTrain, 4, a);
  EXPECT_EQ(sample_observed(r, p, Stage::kTest, 4, a), first);
  EXPECT_EQ(sample_observed(r, p, Stage::kTest, 4, b), first);
  EXPECT_NE(sample_observed(r, p, Stage::kVal, 4, a), first);
  EXPECT_NE(sample_observed(r, p, Stage::kTest, 5, a), first);
  p.eval_seed = 18;
  EXPECT_NE(sample_observed(r, p, Stage::kTest, 4, a), first);
}

TEST(Observation, TrainDrawsVary) {
  const auto r = record_of(30);
  ObservationProtocol p;
  Rng rng(5);
  const auto a = sample_observed(r, p, Stage::kTrain, 0, rng);
  bool changed = false;
  for (int i = 0; i < 10 && !changed; ++i) changed = sample_observed(r, p, Stage::kTrain, 0, rng) != a;
  EXPECT_TRUE(changed);
}

TEST(Stage, Names) {
  EXPECT_EQ(parse_stage("valid"), Stage::kVal);
  EXPECT_EQ(stage_name(Stage::kTest), "test");
  EXPECT_THROW(parse_stage("dev"), std::invalid_argument);
}

TEST(Splits, CountsAndDeterminism) {
  const auto s = make_splits(101, {0.7, 0.15, 0.15}, 3);
  EXPECT_EQ(std::count(s.begin(), s.end(), Stage::kTrain), 70);
  EXPECT_EQ(std::count(s.begin(), s.end(), Stage::kVal), 15);
  EXPECT_EQ(std::count(s.begin(), s.end(), Stage::kTest), 16);
  EXPECT_EQ(make_splits(101, {0.7, 0.15, 0.15}, 3), s);
  EXPECT_NE(make_splits(101, {0.7, 0.15, 0.15}, 4), s);
  EXPECT_THROW(make_splits(10, {0.7, 0.2, 0.2}, 0), std::invalid_argument);
  EXPECT_THROW(make_splits(10, {1.2, -0.1, -0.1}, 0), std::invalid_argument);
}

TEST(Splits, RoundTripAndErrors) {
  const auto s = make_splits(9, {0.5, 0.25, 0.25}, 1);
  std::stringstream buf;
  write_splits(buf, s);
  EXPECT_EQ(read_splits(buf, 9), s);

  std::istringstream missing("0\ttrain\n");
  EXPECT_THROW(read_splits(missing, 2), ParseError);
  std::istringstream range("0\ttrain\n5\ttest\n");
  EXPECT_THROW(read_splits(range, 2), ParseError);
  std::istringstream tag("0\ttrain\n1\tdev\n");
  try {
    read_splits(tag, 2, "s.txt");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(read_splits(std::filesystem::path("/nonexistent/splits.txt"), 2), std::runtime_error);
}
