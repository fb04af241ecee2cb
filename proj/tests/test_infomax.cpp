#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "psi/infomax.hpp"
#include "psi/testing/oracles.hpp"

using namespace psi;
using ad::Matrix;
using ad::Tensor;

namespace {

double softplus_ref(double x) { return std::log1p(std::exp(x)); }

Matrix random_scores(std::size_t r, std::size_t c, Rng& rng) {
  std::normal_distribution<double> n(0.0, 2.0);
  Matrix m(r, c);
  for (auto& x : m.data()) x = n(rng);
  return m;
}

}  // namespace

TEST(Losses, UninformativeScoresGiveLogConstants) {
  const auto zero3 = Tensor::constant(Matrix(3, 1, 0.0));
  EXPECT_NEAR(gd_loss(zero3, zero3).item(), 2.0 * std::log(2.0), 1e-12);
  for (std::size_t k : {1u, 4u, 15u}) {
    EXPECT_NEAR(infonce_loss(zero3, Tensor::constant(Matrix(3, k, 0.0))).item(), std::log(k + 1.0), 1e-12);
  }
  EXPECT_NEAR(khop_loss(zero3, Tensor::constant(Matrix(5, 1, 0.0))).item(), std::log(2.0), 1e-12);
}

TEST(Losses, GdMatchesScalarLoop) {
  Rng rng(1);
  const auto pos = random_scores(4, 1, rng), neg = random_scores(7, 1, rng);
  double want = 0.0;
  for (double p : pos.data()) want += softplus_ref(-p) / 4.0;
  for (double n : neg.data()) want += softplus_ref(n) / 7.0;
  EXPECT_NEAR(gd_loss(Tensor::constant(pos), Tensor::constant(neg)).item(), want, 1e-12);
}

TEST(Losses, KhopPoolsBothSidesIntoOneMean) {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    std::uniform_int_distribution<std::size_t> sz(1, 9);
    const auto pos = random_scores(sz(rng), 1, rng), neg = random_scores(sz(rng), 1, rng);
    double total = 0.0;
    for (double p : pos.data()) total += softplus_ref(-p);
    for (double n : neg.data()) total += softplus_ref(n);
    const double want = total / static_cast<double>(pos.size() + neg.size());
    EXPECT_NEAR(khop_loss(Tensor::constant(pos), Tensor::constant(neg)).item(), want, 1e-12);
  }
}

TEST(Losses, KhopSkipsAnEmptySide) {
  const auto pos = Tensor::constant(Matrix{{1.0}, {-2.0}});
  EXPECT_NEAR(khop_loss(pos, Tensor()).item(), (softplus_ref(-1.0) + softplus_ref(2.0)) / 2.0, 1e-12);
  EXPECT_NEAR(khop_loss(Tensor::constant(Matrix(0, 1)), pos).item(), (softplus_ref(1.0) + softplus_ref(-2.0)) / 2.0,
              1e-12);
  EXPECT_THROW(khop_loss(Tensor(), Tensor::constant(Matrix(0, 1))), std::invalid_argument);
}

TEST(Losses, InfoNceMatchesScalarLoopAndFallsWithPositive) {
  Rng rng(3);
  const auto pos = random_scores(3, 1, rng), neg = random_scores(3, 4, rng);
  double want = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    double z = std::exp(pos(i, 0));
    for (std::size_t j = 0; j < 4; ++j) z += std::exp(neg(i, j));
    want += (std::log(z) - pos(i, 0)) / 3.0;
  }
  const double base = infonce_loss(Tensor::constant(pos), Tensor::constant(neg)).item();
  EXPECT_NEAR(base, want, 1e-12);
  auto higher = pos;
  higher(0, 0) += 1.0;
  EXPECT_LT(infonce_loss(Tensor::constant(higher), Tensor::constant(neg)).item(), base);
  EXPECT_THROW(infonce_loss(Tensor::constant(pos), Tensor::constant(Matrix(2, 4))), std::invalid_argument);
}

TEST(Losses, GdRejectsEmptySides) {
  EXPECT_THROW(gd_loss(Tensor::constant(Matrix(0, 1)), Tensor::constant(Matrix(1, 1))), std::invalid_argument);
  EXPECT_THROW(gd_loss(Tensor::constant(Matrix(1, 1)), Tensor()), std::invalid_argument);
}

TEST(LossWeights, RejectNegative) {
  LossWeights w;
  EXPECT_NO_THROW(w.validate());
  w.lambda_khop = -0.1;
  EXPECT_THROW(w.validate(), std::invalid_argument);
}

TEST(Negatives, PermutationAndShuffle) {
  Rng rng(4);
  auto perm = random_permutation(50, rng);
  std::set<std::size_t> seen(perm.begin(), perm.end());
  EXPECT_EQ(seen.size(), 50u);
  EXPECT_EQ(*seen.rbegin(), 49u);

  Matrix h(6, 2);
  for (std::size_t i = 0; i < 6; ++i) h(i, 0) = h(i, 1) = static_cast<double>(i);
  const auto s = shuffle_negatives(Tensor::constant(h), rng).value();
  std::multiset<double> rows;
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(s(i, 0), s(i, 1));
    rows.insert(s(i, 0));
  }
  EXPECT_EQ(rows, (std::multiset<double>{0, 1, 2, 3, 4, 5}));
}

TEST(Negatives, CrossSubgraphStacksOthers) {
  std::vector<Tensor> batch{Tensor::constant(Matrix{{1, 1}}), Tensor::constant(Matrix{{2, 2}, {3, 3}}),
                            Tensor::constant(Matrix{{4, 4}})};
  EXPECT_EQ(cross_subgraph_negatives(batch, 1).value(), (Matrix{{1, 1}, {4, 4}}));
  EXPECT_EQ(cross_subgraph_negatives(batch, 0).rows(), 3u);
  EXPECT_THROW(cross_subgraph_negatives(std::span(batch).first(1), 0), std::invalid_argument);
  EXPECT_THROW(cross_subgraph_negatives(batch, 3), std::invalid_argument);
}

TEST(ConditionalBound, FrozenInstance) {
  // Reference values computed independently in double precision.
  const Matrix f{{1, -0.5, 0.3}, {0.2, 0.9, -1.1}};
  const Matrix p{{0.1, 0.2, 0.15}, {0.25, 0.05, 0.25}};
  const auto r = verify_cgd_bound(f, p);
  EXPECT_NEAR(r.i_gd, -1.624191576784713, 1e-12);
  EXPECT_NEAR(r.i_cgd, -1.9541895042215471, 1e-12);
  EXPECT_TRUE(r.holds);
}

TEST(ConditionalBound, ConstantScoresAreTight) {
  const Matrix f(3, 4, 0.7);
  Matrix p(3, 4, 1.0 / 12.0);
  const auto r = verify_cgd_bound(f, p);
  EXPECT_NEAR(r.i_gd, r.i_cgd, 1e-12);
  EXPECT_TRUE(r.holds);
}

TEST(ConditionalBound, InputValidation) {
  EXPECT_THROW(verify_cgd_bound(Matrix(2, 2), Matrix(2, 3, 1.0 / 6)), std::invalid_argument);
  EXPECT_THROW(verify_cgd_bound(Matrix(1, 2), Matrix{{1.0, 0.0}}), std::invalid_argument);
}

TEST(ConditionalBound, HoldsOnRandomInstances) {
  const auto r = psi::testing::cgd_bound_check(500, 7);
  EXPECT_TRUE(r.passed) << r.detail;
}

TEST(ConditionalBound, RandomInstanceShape) {
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    const auto inst = random_cgd_instance(8, 1.0, rng);
    EXPECT_GE(inst.f.rows(), 1u);
    EXPECT_LE(inst.f.cols(), 8u);
    double total = 0.0;
    for (double x : inst.p_xy.data()) {
      EXPECT_GT(x, 0.0);
      total += x;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}
