#include <gtest/gtest.h>

#include <cmath>

#include "psi/autodiff.hpp"
#include "psi/optim.hpp"
#include "psi/testing/oracles.hpp"

using namespace psi;
using ad::Matrix;
using ad::Tensor;

TEST(Matrix, ConstructionAndAccess) {
  Matrix m{{1, 2, 3}, {4, 5, 6}};
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m.cols(), 3u);
  EXPECT_EQ(m(1, 2), 6.0);
  EXPECT_EQ(Matrix::identity(2), (Matrix{{1, 0}, {0, 1}}));
  EXPECT_THROW(Matrix(2, 2, std::vector<double>{1, 2, 3}), std::invalid_argument);
  EXPECT_THROW((Matrix{{1, 2}, {3}}), std::invalid_argument);
}

TEST(Forward, MatmulByHand) {
  auto a = Tensor::constant(Matrix{{1, 2}, {3, 4}});
  auto b = Tensor::constant(Matrix{{5}, {6}});
  EXPECT_EQ(ad::matmul(a, b).value(), (Matrix{{17}, {39}}));
  EXPECT_THROW(ad::matmul(b, b), std::invalid_argument);
}

TEST(Forward, BroadcastAddAndShapeErrors) {
  auto a = Tensor::constant(Matrix{{1, 2}, {3, 4}});
  auto row = Tensor::constant(Matrix{{10, 20}});
  EXPECT_EQ(ad::add(a, row).value(), (Matrix{{11, 22}, {13, 24}}));
  EXPECT_THROW(ad::add(a, Tensor::constant(Matrix{{1, 2, 3}})), std::invalid_argument);
  EXPECT_THROW(ad::mul(a, row), std::invalid_argument);
  try {
    ad::sub(a, Tensor::constant(Matrix(3, 1)));
    FAIL();
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("2x2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("3x1"), std::string::npos) << msg;
  }
}

TEST(Forward, StableSoftmaxFamily) {
  auto a = Tensor::constant(Matrix{{1000.0, 1000.0}, {-1000.0, 0.0}});
  const auto sm = ad::softmax_rows(a).value();
  EXPECT_DOUBLE_EQ(sm(0, 0), 0.5);
  EXPECT_NEAR(sm(1, 1), 1.0, 1e-15);
  const auto lse = ad::logsumexp_rows(a).value();
  EXPECT_NEAR(lse(0, 0), 1000.0 + std::log(2.0), 1e-9);
  EXPECT_NEAR(lse(1, 0), 0.0, 1e-12);
  const auto ls = ad::log_softmax_rows(a).value();
  EXPECT_NEAR(ls(0, 1), -std::log(2.0), 1e-12);
  EXPECT_TRUE(std::isfinite(ls(1, 0)));
}

TEST(Forward, SoftplusAndSigmoidExtremes) {
  auto a = Tensor::constant(Matrix{{-800.0, 0.0, 800.0}});
  const auto sp = ad::softplus(a).value();
  EXPECT_NEAR(sp(0, 0), 0.0, 1e-300);
  EXPECT_DOUBLE_EQ(sp(0, 1), std::log(2.0));
  EXPECT_DOUBLE_EQ(sp(0, 2), 800.0);
  const auto sg = ad::sigmoid(a).value();
  EXPECT_EQ(sg(0, 0), 0.0);
  EXPECT_EQ(sg(0, 1), 0.5);
  EXPECT_EQ(sg(0, 2), 1.0);
}

TEST(Forward, NormalizeRowsKeepsZeroRow) {
  auto a = Tensor::parameter(Matrix{{3, 4}, {0, 0}});
  auto n = ad::normalize_rows(a);
  EXPECT_EQ(n.value(), (Matrix{{0.6, 0.8}, {0, 0}}));
  ad::backward(ad::sum(n));
  EXPECT_EQ(a.grad()[2], 0.0);
  EXPECT_EQ(a.grad()[3], 0.0);
}

TEST(Forward, ReductionsAndReshapes) {
  auto a = Tensor::constant(Matrix{{1, 2}, {3, 4}, {5, 6}});
  EXPECT_EQ(ad::mean_rows(a).value(), (Matrix{{3, 4}}));
  EXPECT_EQ(ad::sum(a).item(), 21.0);
  EXPECT_EQ(ad::mean(a).item(), 3.5);
  EXPECT_EQ(ad::transpose(a).value(), (Matrix{{1, 3, 5}, {2, 4, 6}}));
  const std::vector<std::size_t> rows{2, 0, 2};
  EXPECT_EQ(ad::gather_rows(a, rows).value(), (Matrix{{5, 6}, {1, 2}, {5, 6}}));
  EXPECT_EQ(ad::pick(a, 2, 1).item(), 6.0);
  EXPECT_THROW(ad::pick(a, 3, 0), std::invalid_argument);
  EXPECT_THROW(ad::mean_rows(Tensor::constant(Matrix(0, 2))), std::invalid_argument);
  EXPECT_EQ(ad::sum(Tensor::constant(Matrix(0, 0))).item(), 0.0);
  const std::vector<std::size_t> bad{3};
  EXPECT_THROW(ad::gather_rows(a, bad), std::invalid_argument);
}

TEST(Forward, Concat) {
  auto a = Tensor::constant(Matrix{{1}, {2}});
  auto b = Tensor::constant(Matrix{{3, 4}, {5, 6}});
  EXPECT_EQ(ad::concat_cols(a, b).value(), (Matrix{{1, 3, 4}, {2, 5, 6}}));
  std::vector<Tensor> parts{ad::transpose(a), Tensor::constant(Matrix{{7, 8}})};
  EXPECT_EQ(ad::concat_rows(parts).value(), (Matrix{{1, 2}, {7, 8}}));
  EXPECT_THROW(ad::concat_cols(a, Tensor::constant(Matrix(3, 1))), std::invalid_argument);
}

TEST(Forward, DropoutScalesKeptEntries) {
  auto a = Tensor::constant(Matrix(40, 40, 1.0));
  Rng rng(5);
  const auto d = ad::dropout(a, 0.25, rng, true).value();
  std::size_t zeros = 0;
  for (double x : d.data()) {
    if (x == 0.0) {
      ++zeros;
    } else {
      EXPECT_DOUBLE_EQ(x, 1.0 / 0.75);
    }
  }
  EXPECT_NEAR(static_cast<double>(zeros) / 1600.0, 0.25, 0.05);
  EXPECT_EQ(ad::dropout(a, 0.25, rng, false).node(), a.node());
  EXPECT_THROW(ad::dropout(a, 1.0, rng, true), std::invalid_argument);
}

TEST(Backward, RejectsNonScalarLoss) {
  auto a = Tensor::parameter(Matrix(2, 2, 1.0));
  EXPECT_THROW(ad::backward(a), std::invalid_argument);
}

TEST(Backward, AccumulatesUntilZeroGrad) {
  auto w = Tensor::parameter(Matrix{{2.0}});
  auto loss = [&] { return ad::mul(w, w); };
  ad::backward(loss());
  EXPECT_DOUBLE_EQ(w.grad()[0], 4.0);
  ad::backward(loss());
  EXPECT_DOUBLE_EQ(w.grad()[0], 8.0);
  w.zero_grad();
  EXPECT_FALSE(w.has_grad());
}

TEST(Backward, SharedParameterSumsPaths) {
  // y = w * (w + 3) => dy/dw = 2w + 3
  auto w = Tensor::parameter(Matrix{{1.5}});
  ad::backward(ad::mul(w, ad::add(w, Tensor::scalar(3.0))));
  EXPECT_DOUBLE_EQ(w.grad()[0], 6.0);
}

TEST(Backward, DetachStopsGradient) {
  auto w = Tensor::parameter(Matrix{{1.5}});
  ad::backward(ad::mul(w, ad::detach(w)));
  EXPECT_DOUBLE_EQ(w.grad()[0], 1.5);
}

TEST(Backward, ConstantsGetNoGradient) {
  auto c = Tensor::constant(Matrix{{1.0}});
  auto w = Tensor::parameter(Matrix{{2.0}});
  ad::backward(ad::mul(c, w));
  EXPECT_FALSE(c.has_grad());
  EXPECT_DOUBLE_EQ(w.grad()[0], 1.0);
}

TEST(Backward, AggregateMeanByHand) {
  // targets: 0 <- {1, 2} (weights 0.5 each), 1 <- {} (zero row)
  auto agg = std::make_shared<ad::Aggregation>();
  agg->num_targets = 2;
  agg->num_sources = 3;
  agg->offsets = {0, 2, 2};
  agg->sources = {1, 2};
  agg->weights = {0.5, 0.5};
  auto x = Tensor::parameter(Matrix{{1, 1}, {2, 4}, {6, 8}});
  auto y = ad::aggregate(x, agg);
  EXPECT_EQ(y.value(), (Matrix{{4, 6}, {0, 0}}));
  ad::backward(ad::sum(y));
  EXPECT_EQ(std::vector<double>(x.grad().begin(), x.grad().end()), (std::vector<double>{0, 0, 0.5, 0.5, 0.5, 0.5}));
}

TEST(FiniteDifference, EveryOpPasses) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    for (const auto& r : psi::testing::op_gradient_checks(seed)) {
      EXPECT_TRUE(r.passed) << "seed " << seed << " " << r.name << ": " << r.detail;
    }
  }
}

TEST(FiniteDifference, DetectsAWrongGradient) {
  // A deliberately broken op: forward x^2, backward claims 3x.
  auto w = Tensor::parameter(Matrix{{0.7, -1.2}});
  auto broken = [&] {
    auto node = std::make_shared<ad::Node>();
    node->value = Matrix(1, 1, w.value()[0] * w.value()[0] + w.value()[1] * w.value()[1]);
    node->parents = {w.node()};
    node->requires_grad = true;
    node->is_leaf = false;
    node->backward_fn = [](ad::Node& self) {
      auto& p = *self.parents[0];
      auto g = p.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0] * 3.0 * p.value[i];
    };
    return Tensor(node);
  };
  std::vector<Tensor> params{w};
  EXPECT_GT(finite_diff_check(broken, params), 0.1);
}
