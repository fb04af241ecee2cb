#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "psi/optim.hpp"

using namespace psi;
using ad::Matrix;

TEST(ParameterStore, RegistersInOrderAndRejectsDuplicates) {
  ParameterStore s;
  s.add("b", Matrix(1, 2));
  s.add("a", Matrix(3, 1));
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s.entries()[0].name, "b");
  EXPECT_EQ(s.num_scalars(), 5u);
  EXPECT_THROW(s.add("a", Matrix(1, 1)), std::invalid_argument);
  EXPECT_THROW(s.get("missing"), std::out_of_range);
  EXPECT_TRUE(s.get("a").requires_grad());
}

TEST(ParameterStore, UniformInitWithinFanInBound) {
  ParameterStore s;
  Rng rng(1);
  auto w = s.add_uniform("w", 30, 20, 16, rng);
  double lo = 1.0, hi = -1.0;
  for (double x : w.value().data()) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  EXPECT_GE(lo, -0.25);
  EXPECT_LE(hi, 0.25);
  EXPECT_LT(lo, -0.2);  // the range is actually used
  EXPECT_GT(hi, 0.2);
}

TEST(ParameterStore, SnapshotRestore) {
  ParameterStore s;
  auto w = s.add("w", Matrix{{1, 2}});
  const auto snap = s.snapshot();
  w.mutable_value()(0, 0) = 9.0;
  s.restore(snap);
  EXPECT_EQ(w.value(), (Matrix{{1, 2}}));
  std::vector<Matrix> wrong{Matrix(2, 2)};
  EXPECT_THROW(s.restore(wrong), std::invalid_argument);
}

TEST(Adam, TwoStepsMatchReference) {
  // Reference computed independently: p0 = 0.5, grads 0.2 then -0.1,
  // lr 1e-3, betas (0.9, 0.999), eps 1e-8.
  ParameterStore s;
  auto w = s.add("w", Matrix{{0.5}});
  AdamConfig cfg;
  w.mutable_grad()[0] = 0.2;
  adam_step(s, cfg);
  EXPECT_FALSE(w.has_grad());
  w.mutable_grad()[0] = -0.1;
  adam_step(s, cfg);
  EXPECT_NEAR(w.value()(0, 0), 0.49873366302718675, 1e-15);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParameterStore s;
  auto w = s.add("w", Matrix{{1.0, -1.0}});
  w.mutable_grad()[0] = 3.0;
  w.mutable_grad()[1] = -0.01;
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  adam_step(s, cfg);
  EXPECT_NEAR(w.value()(0, 0), 0.9, 1e-8);
  EXPECT_NEAR(w.value()(0, 1), -0.9, 1e-6);
}

TEST(Adam, SkipsParametersWithoutGradient) {
  ParameterStore s;
  auto a = s.add("a", Matrix{{1.0}});
  auto b = s.add("b", Matrix{{1.0}});
  a.mutable_grad()[0] = 1.0;
  adam_step(s, {});
  EXPECT_NE(a.value()(0, 0), 1.0);
  EXPECT_EQ(b.value()(0, 0), 1.0);
  EXPECT_EQ(s.entries()[1].steps, 0u);
}

TEST(Adam, WeightDecayAddsToGradient) {
  ParameterStore s1, s2;
  auto a = s1.add("w", Matrix{{2.0}});
  auto b = s2.add("w", Matrix{{2.0}});
  AdamConfig plain, decay;
  plain.learning_rate = decay.learning_rate = 0.01;
  decay.weight_decay = 0.5;
  for (int i = 0; i < 3; ++i) {
    a.mutable_grad()[0] = 0.1 + 0.5 * a.value()(0, 0);
    adam_step(s1, plain);
    b.mutable_grad()[0] = 0.1;
    adam_step(s2, decay);
  }
  EXPECT_NEAR(a.value()(0, 0), b.value()(0, 0), 1e-15);
}

TEST(Adam, ConfigValidation) {
  AdamConfig c;
  EXPECT_NO_THROW(c.validate());
  c.learning_rate = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.beta2 = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.weight_decay = -1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  ParameterStore s;
  Rng rng(3);
  s.add_uniform("layer.weight", 5, 4, 5, rng);
  s.add("bias", Matrix{{1.0 / 3.0, -2.5e-300, 123456.789}});
  const auto json = parameters_to_json(s);

  ParameterStore t;
  Rng other(99);
  t.add_uniform("layer.weight", 5, 4, 5, other);
  t.add("bias", Matrix(1, 3));
  parameters_from_json(t, json);
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(s.entries()[i].tensor.value(), t.entries()[i].tensor.value());

  const auto path = std::filesystem::temp_directory_path() / "psi_checkpoint_test.json";
  save_parameters(s, path);
  ParameterStore u;
  u.add("layer.weight", Matrix(5, 4));
  u.add("bias", Matrix(1, 3));
  load_parameters(u, path);
  EXPECT_EQ(u.get("bias").value(), s.get("bias").value());
  std::filesystem::remove(path);
}

TEST(Checkpoint, RejectsMismatches) {
  ParameterStore s;
  s.add("w", Matrix(2, 2, 1.0));
  const auto json = parameters_to_json(s);

  ParameterStore shape;
  shape.add("w", Matrix(2, 3));
  EXPECT_THROW(parameters_from_json(shape, json), std::runtime_error);

  ParameterStore extra;
  extra.add("w", Matrix(2, 2));
  extra.add("v", Matrix(1, 1));
  EXPECT_THROW(parameters_from_json(extra, json), std::runtime_error);

  ParameterStore fewer;
  EXPECT_THROW(parameters_from_json(fewer, json), std::runtime_error);

  EXPECT_THROW(parameters_from_json(extra, "{not json"), std::runtime_error);
  EXPECT_THROW(parameters_from_json(extra, R"({"format": "other", "version": 1, "parameters": []})"),
               std::runtime_error);
  EXPECT_THROW(load_parameters(extra, "/nonexistent/psi.json"), std::runtime_error);
}
