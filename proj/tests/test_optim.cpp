#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "reluhead/error.hpp"
#include "reluhead/optim.hpp"

using namespace reluhead;

namespace {

struct Scalar {
  Tensor value = Tensor::vector({1.0});
  Tensor grad = Tensor::vector({0.0});
  std::vector<ParamRef> refs() { return {{"x", &value, &grad}}; }
};

}  // namespace

TEST(Adam, ZeroGradientLeavesParamsUnchanged) {
  Scalar p;
  Adam adam;
  adam.step(p.refs());
  EXPECT_EQ(p.value[0], 1.0);
  EXPECT_EQ(adam.timestep(), 1u);
}

TEST(Adam, FirstStepMovesByLearningRateAgainstGradientSign) {
  for (double g : {3.0, -0.02, 1e-3}) {
    Scalar p;
    p.grad[0] = g;
    Adam adam;
    adam.step(p.refs());
    // m_hat = g, v_hat = g^2 after bias correction.
    const double expected = 1.0 - 1e-3 * g / (std::abs(g) + 1e-8);
    EXPECT_NEAR(p.value[0], expected, 1e-15);
  }
}

TEST(Adam, ConvergesOnQuadratic) {
  Scalar p;
  Adam adam(AdamSettings{0.05, 0.9, 0.999, 1e-8});
  for (int i = 0; i < 200; ++i) {
    p.grad[0] = 2.0 * p.value[0];
    adam.step(p.refs());
  }
  EXPECT_LT(std::abs(p.value[0]), 0.01);
}

TEST(Adam, DefaultSettings) {
  const AdamSettings s;
  EXPECT_EQ(s.learning_rate, 1e-3);
  EXPECT_EQ(s.beta1, 0.9);
  EXPECT_EQ(s.beta2, 0.999);
  EXPECT_EQ(s.epsilon, 1e-8);
}

TEST(Adam, TinyGradientsGiveTinyUpdates) {
  Scalar p;
  p.grad[0] = 1e-12;
  Adam adam;
  adam.step(p.refs());
  EXPECT_LT(std::abs(p.value[0] - 1.0), 1e-3 * 1e-3);
}

TEST(Adam, ShapeChangeIsStateError) {
  Scalar p;
  Adam adam;
  adam.step(p.refs());
  Tensor other = Tensor::vector({1.0, 2.0}), other_grad = Tensor::vector({0.0, 0.0});
  std::vector<ParamRef> refs{{"x", &other, &other_grad}};
  EXPECT_THROW(adam.step(refs), StateError);
  Tensor bad_grad = Tensor::vector({0.0, 0.0});
  std::vector<ParamRef> mismatched{{"x", &p.value, &bad_grad}};
  Adam fresh;
  EXPECT_THROW(fresh.step(mismatched), StateError);
}

TEST(Sgd, Examples) {
  Scalar p;
  p.grad[0] = 1.0;
  Sgd sgd(0.1);
  sgd.step(p.refs());
  EXPECT_DOUBLE_EQ(p.value[0], 0.9);
  p.grad[0] = 0.0;
  sgd.step(p.refs());
  EXPECT_DOUBLE_EQ(p.value[0], 0.9);
}

TEST(Sgd, GeometricDecayOnQuadratic) {
  Scalar p;
  Sgd sgd(0.1);
  for (int i = 0; i < 100; ++i) {
    p.grad[0] = 2.0 * p.value[0];
    sgd.step(p.refs());
  }
  EXPECT_NEAR(p.value[0], std::pow(0.8, 100), 1e-22);
  EXPECT_THROW(Sgd(0.0), ConfigError);
}

TEST(MinibatchIter, PartitionsIndices) {
  Rng rng(1);
  const auto batches = minibatch_iter(10, 3, rng);
  ASSERT_EQ(batches.size(), 4u);
  EXPECT_EQ(batches[0].size(), 3u);
  EXPECT_EQ(batches[3].size(), 1u);
  std::vector<std::size_t> all;
  for (const auto& b : batches) all.insert(all.end(), b.begin(), b.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(all[i], i);
}

TEST(MinibatchIter, DeterministicUnderSeed) {
  Rng a(5), b(5);
  EXPECT_EQ(minibatch_iter(50, 7, a), minibatch_iter(50, 7, b));
  EXPECT_THROW(minibatch_iter(5, 0, a), ConfigError);
}

TEST(MinibatchIter, CoversEveryIndexOncePerEpoch) {
  Rng rng(2);
  for (std::size_t n = 1; n <= 40; ++n)
    for (std::size_t batch = 1; batch <= n + 1; ++batch) {
      std::vector<int> seen(n, 0);
      for (const auto& b : minibatch_iter(n, batch, rng))
        for (std::size_t i : b) ++seen.at(i);
      for (int s : seen) EXPECT_EQ(s, 1);
    }
}
