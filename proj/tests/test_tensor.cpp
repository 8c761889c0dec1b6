#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "reluhead/error.hpp"
#include "reluhead/tensor.hpp"

using namespace reluhead;

TEST(Tensor, ShapeAndSize) {
  Tensor t({2, 3});
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rank(), 2u);
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), ShapeError);
  EXPECT_THROW(Tensor({1, 1, 1, 1, 1}), ShapeError);
  EXPECT_THROW(t.reshaped({4}), ShapeError);
}

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  const Tensor a = Tensor::matrix({{1, 2}, {3, 4}});
  EXPECT_EQ(matmul(Tensor::identity(2), a), a);
  EXPECT_EQ(matmul(a, Tensor::identity(2)), a);
}

TEST(Matmul, MatchesTripleLoop) {
  const Tensor a = Tensor::matrix({{1, 2}, {3, 4}});
  const Tensor b = Tensor::matrix({{5}, {6}});
  EXPECT_EQ(matmul(a, b), oracle::matmul(a, b));
  EXPECT_EQ(matmul(a, b), Tensor::matrix({{17}, {39}}));

  Rng rng(3);
  const Tensor x = randn({7, 5}, 1.0, rng), y = randn({5, 4}, 1.0, rng);
  EXPECT_LT(oracle::max_rel_error(matmul(x, y), oracle::matmul(x, y)), 1e-12);
  EXPECT_LT(oracle::max_rel_error(matmul(x.transposed(), Transpose::Yes, y, Transpose::No),
                                  oracle::matmul(x, y)),
            1e-12);
  EXPECT_LT(oracle::max_rel_error(matmul(x, Transpose::No, y.transposed(), Transpose::Yes),
                                  oracle::matmul(x, y)),
            1e-12);
}

TEST(Matmul, ZerosAnnihilate) {
  Rng rng(1);
  EXPECT_EQ(matmul(Tensor::zeros({2, 3}), randn({3, 4}, 1.0, rng)), Tensor::zeros({2, 4}));
}

TEST(Matmul, DimensionMismatchIsShapeError) {
  EXPECT_THROW(matmul(Tensor({2, 3}), Tensor({2, 3})), ShapeError);
}

TEST(Conv2d, OutputShapeOfFirstCnnLayer) {
  Rng rng(0);
  const Tensor out = conv2d_valid(Tensor({1, 1, 16, 16}), randn({32, 1, 3, 3}, 1.0, rng),
                                  Tensor({32}));
  EXPECT_EQ(out.shape(), (Shape{1, 32, 14, 14}));
}

TEST(Conv2d, ZeroKernelGivesZeros) {
  Rng rng(0);
  const Tensor out = conv2d_valid(randn({1, 1, 5, 5}, 1.0, rng), Tensor({1, 1, 3, 3}), Tensor({1}));
  for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(Conv2d, OnesKernelSumsInput) {
  Rng rng(2);
  const Tensor x = randn({1, 1, 3, 3}, 1.0, rng);
  const Tensor out = conv2d_valid(x, Tensor({1, 1, 3, 3}, 1.0), Tensor({1}));
  double sum = 0.0;
  for (double v : x.data()) sum += v;
  ASSERT_EQ(out.size(), 1u);
  EXPECT_NEAR(out[0], sum, 1e-12);
}

TEST(Conv2d, MatchesDirectSummation) {
  Rng rng(4);
  const Tensor x = randn({2, 3, 7, 6}, 1.0, rng);
  const Tensor k = randn({4, 3, 3, 3}, 1.0, rng);
  const Tensor b = randn({4}, 1.0, rng);
  EXPECT_LT(oracle::max_rel_error(conv2d_valid(x, k, b), oracle::conv(x, k, b)), 1e-12);
}

TEST(Conv2d, LinearInInput) {
  Rng rng(5);
  const Tensor a = randn({1, 2, 6, 6}, 1.0, rng), b = randn({1, 2, 6, 6}, 1.0, rng);
  const Tensor k = randn({3, 2, 3, 3}, 1.0, rng), bias = randn({3}, 1.0, rng);
  const Tensor lhs = conv2d_valid(add(a, b), k, bias);
  Tensor rhs = add(conv2d_valid(a, k, bias), conv2d_valid(b, k, bias));
  const Tensor bias_map = conv2d_valid(Tensor({1, 2, 6, 6}), k, bias);
  rhs = sub(rhs, bias_map);
  for (std::size_t i = 0; i < lhs.size(); ++i) EXPECT_NEAR(lhs[i], rhs[i], 1e-12);
}

TEST(Conv2d, BackwardMatchesFiniteDifferences) {
  Rng rng(6);
  Tensor x = randn({1, 2, 5, 5}, 1.0, rng);
  Tensor k = randn({2, 2, 3, 3}, 1.0, rng);
  Tensor b = randn({2}, 1.0, rng);
  const Tensor w = randn({1, 2, 3, 3}, 1.0, rng);
  auto f = [&] { return oracle::probe_loss(conv2d_valid(x, k, b), w); };
  const Conv2dGrads g = conv2d_valid_backward(x, k, w);
  EXPECT_LT(oracle::max_rel_error(g.input, oracle::numeric_grad(x, f)), 1e-6);
  EXPECT_LT(oracle::max_rel_error(g.kernels, oracle::numeric_grad(k, f)), 1e-6);
  EXPECT_LT(oracle::max_rel_error(g.bias, oracle::numeric_grad(b, f)), 1e-6);
}

TEST(Conv2d, ShapeErrors) {
  EXPECT_THROW(conv2d_valid(Tensor({1, 1, 2, 5}), Tensor({1, 1, 3, 3}), Tensor({1})), ShapeError);
  EXPECT_THROW(conv2d_valid(Tensor({1, 2, 5, 5}), Tensor({1, 1, 3, 3}), Tensor({1})), ShapeError);
  EXPECT_THROW(conv2d_valid(Tensor({1, 1, 5, 5}), Tensor({1, 1, 3, 3}), Tensor({2})), ShapeError);
}

TEST(MaxPool, HalvesSpatialDims) {
  EXPECT_EQ(maxpool2x2(Tensor({1, 32, 12, 12})).output.shape(), (Shape{1, 32, 6, 6}));
}

TEST(MaxPool, ConstantInputGivesConstantOutputAndLowestIndex) {
  const PoolResult r = maxpool2x2(Tensor({1, 1, 4, 4}, 7.0));
  for (double v : r.output.data()) EXPECT_EQ(v, 7.0);
  EXPECT_EQ(r.argmax, (std::vector<std::size_t>{0, 2, 8, 10}));
}

TEST(MaxPool, PicksMaximumWithIndex) {
  const PoolResult r = maxpool2x2(Tensor({1, 1, 2, 2}, {1, 2, 3, 4}));
  ASSERT_EQ(r.output.size(), 1u);
  EXPECT_EQ(r.output[0], 4.0);
  EXPECT_EQ(r.argmax[0], 3u);
}

TEST(MaxPool, BackwardRoutesToWinners) {
  Rng rng(8);
  const Tensor x = randn({2, 3, 6, 6}, 1.0, rng);
  const PoolResult r = maxpool2x2(x);
  Tensor up(r.output.shape());
  for (std::size_t i = 0; i < up.size(); ++i) up[i] = static_cast<double>(i + 1);
  const Tensor g = maxpool2x2_backward(up, r.argmax, x.shape());
  std::size_t nonzero = 0;
  for (std::size_t i = 0; i < g.size(); ++i) nonzero += g[i] != 0.0;
  EXPECT_EQ(nonzero, up.size());
  for (std::size_t i = 0; i < up.size(); ++i) EXPECT_EQ(g[r.argmax[i]], up[i]);
  // Re-pooling the scattered gradient lands on the same positions.
  const PoolResult again = maxpool2x2(g);
  EXPECT_EQ(again.argmax, r.argmax);
}

TEST(MaxPool, TooSmallIsShapeError) { EXPECT_THROW(maxpool2x2(Tensor({1, 1, 1, 4})), ShapeError); }

TEST(Elementwise, Examples) {
  EXPECT_EQ(max_with_scalar(0.0, Tensor::vector({-3, 2})), Tensor::vector({0, 2}));
  const Tensor x = Tensor::vector({1, 2, 3});
  EXPECT_EQ(add(x, Tensor::zeros({3})), x);
  EXPECT_EQ(scale(2.0, x), Tensor::vector({2, 4, 6}));
  EXPECT_EQ(sub(x, x), Tensor::zeros({3}));
  EXPECT_EQ(mul(x, x), Tensor::vector({1, 4, 9}));
  EXPECT_THROW(add(x, Tensor::zeros({2})), ShapeError);
}

TEST(ArgmaxLast, Examples) {
  EXPECT_EQ(argmax_last(Tensor::matrix({{0.1, 0.7, 0.2}})), (std::vector<std::size_t>{1}));
  EXPECT_EQ(argmax_last(Tensor::matrix({{0.5, 0.5}})), (std::vector<std::size_t>{0}));
  EXPECT_EQ(argmax_last(Tensor::matrix({{0, 0, 0}})), (std::vector<std::size_t>{0}));
}

TEST(ArgmaxLast, InvariantUnderShiftAndPositiveScale) {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor t = randn({5, 7}, 1.0, rng);
    const auto base = argmax_last(t);
    const double shift = 10.0 * (rng.uniform() - 0.5), factor = 0.01 + 5.0 * rng.uniform();
    Tensor moved = t;
    for (double& v : moved.data()) v = v * factor + shift;
    EXPECT_EQ(argmax_last(moved), base);
  }
}

TEST(Rng, SameSeedSameSequence) {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    if (i == 0) EXPECT_NE(x, c.next_u64());
  }
}

TEST(Rng, BelowStaysInRange) {
  Rng rng(1);
  for (int i = 0; i < 10000; ++i) EXPECT_LT(rng.below(7), 7u);
}

TEST(Randn, DeterministicAndCalibrated) {
  Rng a(11), b(11);
  EXPECT_EQ(randn({2, 3}, 0.05, a), randn({2, 3}, 0.05, b));
  EXPECT_EQ(randn({2, 3}, 0.05, a).size(), 6u);

  Rng rng(12);
  const Tensor t = randn({100000}, 0.05, rng);
  double mean = 0.0, sq = 0.0;
  for (double v : t.data()) mean += v;
  mean /= static_cast<double>(t.size());
  for (double v : t.data()) sq += (v - mean) * (v - mean);
  const double sd = std::sqrt(sq / static_cast<double>(t.size() - 1));
  EXPECT_NEAR(sd, 0.05, 0.02 * 0.05);
  EXPECT_THROW(randn({2}, 0.0, rng), ConfigError);
}
