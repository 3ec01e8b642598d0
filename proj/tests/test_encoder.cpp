#include <gtest/gtest.h>

#include <cmath>

#include "diet/encoder.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace diet;

TEST(InitEncoder, SameSeedIsBitIdentical) {
  std::vector<std::size_t> dims{5, 7, 3};
  EXPECT_EQ(init_encoder(dims, 4), init_encoder(dims, 4));
  EXPECT_NE(init_encoder(dims, 4).checksum(), init_encoder(dims, 5).checksum());
}

TEST(InitEncoder, BiasesStartAtZero) {
  auto enc = init_encoder(std::vector<std::size_t>{5, 7, 6, 3}, 1);
  for (const auto& b : enc.biases)
    for (double v : b) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(enc.weights[1].rows(), 6u);
  EXPECT_EQ(enc.weights[1].cols(), 7u);
}

TEST(InitEncoder, WeightVarianceFollowsFanIn) {
  auto enc = init_encoder(std::vector<std::size_t>{256, 256}, 9);
  double s = 0.0, s2 = 0.0;
  for (double v : enc.weights[0].values()) {
    s += v;
    s2 += v * v;
  }
  const double n = 256.0 * 256.0;
  const double var = s2 / n - (s / n) * (s / n);
  EXPECT_NEAR(var, 2.0 / 256.0, 0.2 * 2.0 / 256.0);
}

TEST(InitEncoder, InvalidDimsThrow) {
  EXPECT_THROW(init_encoder(std::vector<std::size_t>{4}, 1), SpecError);
  EXPECT_THROW(init_encoder(std::vector<std::size_t>{4, 0, 2}, 1), SpecError);
}

TEST(Forward, IdentityHiddenLayerOnNonNegativeInput) {
  // D=3, H=3 identity, K=2 linear map: output == x * A^T.
  auto enc = init_encoder(std::vector<std::size_t>{3, 3, 2}, 1);
  enc.weights[0] = Matrix::identity(3);
  enc.weights[1] = Matrix{{1, 2, 3}, {-1, 0, 0.5}};
  Matrix x{{1, 0, 2}, {0.5, 3, 0}};
  auto out = forward(enc, x).features;
  EXPECT_EQ(out, (Matrix{{7, 0}, {6.5, -0.5}}));
}

TEST(Forward, ZeroInputZeroBiasGivesZero) {
  auto enc = init_encoder(std::vector<std::size_t>{4, 8, 3}, 2);
  auto out = forward(enc, Matrix(5, 4)).features;
  for (double v : out.values()) EXPECT_EQ(v, 0.0);
}

TEST(Forward, MatchesStraightLineImplementation) {
  Rng rng(3);
  auto enc = init_encoder(std::vector<std::size_t>{6, 9, 7, 4}, 3);
  for (auto& b : enc.biases)
    for (double& v : b) v = 0.3 * rng.normal();
  Matrix x = oracle::random_matrix(11, 6, rng);
  EXPECT_LT(oracle::max_abs_diff(forward(enc, x).features,
                                 oracle::straight_line_forward(enc, x)),
            1e-12);
}

TEST(Forward, EncodeMatchesForwardRowByRow) {
  Rng rng(4);
  auto enc = init_encoder(std::vector<std::size_t>{5, 8, 3}, 4);
  Matrix x = oracle::random_matrix(6, 5, rng);
  Matrix all = encode(enc, x);
  EXPECT_EQ(all, forward(enc, x).features);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    Matrix one(1, 5);
    std::copy(x.row(r).begin(), x.row(r).end(), one.row(0).begin());
    Matrix f = encode(enc, one);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(f(0, k), all(r, k));
  }
}

TEST(Forward, PositivelyHomogeneousWithoutBiases) {
  Rng rng(5);
  auto enc = init_encoder(std::vector<std::size_t>{6, 10, 10, 4}, 5);
  Matrix x = oracle::random_matrix(4, 6, rng);
  for (double c : {0.5, 2.0, 7.25}) {
    Matrix cx = x;
    for (double& v : cx.values()) v *= c;
    Matrix fx = encode(enc, x);
    for (double& v : fx.values()) v *= c;
    EXPECT_LT(oracle::max_abs_diff(encode(enc, cx), fx), 1e-10);
  }
}

TEST(Forward, WrongInputWidthThrows) {
  auto enc = init_encoder(std::vector<std::size_t>{4, 3}, 1);
  EXPECT_THROW(forward(enc, Matrix(2, 5)), DimensionError);
  EXPECT_THROW(encode(enc, Matrix(2, 3)), DimensionError);
}

TEST(Backward, ZeroUpstreamGivesZeroGrads) {
  Rng rng(6);
  auto enc = init_encoder(std::vector<std::size_t>{4, 5, 3}, 6);
  auto fw = forward(enc, oracle::random_matrix(3, 4, rng));
  auto bw = backward(enc, fw.cache, Matrix(3, 3));
  for (auto v : bw.grads.views())
    for (double g : v) EXPECT_EQ(g, 0.0);
}

TEST(Backward, LinearEncoderClosedForm) {
  // With the 1/B already inside the upstream gradient (as the loss supplies
  // it), grad W = (G/B)^T x.
  Rng rng(7);
  const std::size_t batch = 5;
  auto enc = init_encoder(std::vector<std::size_t>{4, 3}, 7);
  Matrix x = oracle::random_matrix(batch, 4, rng);
  Matrix g = oracle::random_matrix(batch, 3, rng);
  Matrix g_over_b = g;
  for (double& v : g_over_b.values()) v /= static_cast<double>(batch);
  auto bw = backward(enc, forward(enc, x).cache, g_over_b);
  Matrix expected = oracle::triple_loop_matmul(transpose(g), x);
  for (double& v : expected.values()) v /= static_cast<double>(batch);
  EXPECT_LT(oracle::max_abs_diff(bw.grads.weights[0], expected), 1e-15);
}

TEST(Backward, ShapeMismatchThrows) {
  Rng rng(8);
  auto enc = init_encoder(std::vector<std::size_t>{4, 5, 3}, 8);
  auto fw = forward(enc, oracle::random_matrix(3, 4, rng));
  EXPECT_THROW(backward(enc, fw.cache, Matrix(3, 4)), DimensionError);
  EXPECT_THROW(backward(enc, fw.cache, Matrix(2, 3)), DimensionError);
}

TEST(Backward, EveryParameterMatchesFiniteDifferences) {
  gradcheck::Case c{{5, 7, 6, 4}, 9, 6, 0.8, 17};
  auto r = gradcheck::run(c);
  EXPECT_LT(r.max_rel_error, 1e-5) << r.worst;
  EXPECT_GT(r.checked, 100u);
}

TEST(Backward, RandomConfigurationsMatchFiniteDifferences) {
  Rng rng(123);
  for (std::uint64_t i = 0; i < 10; ++i) {
    auto c = gradcheck::random_case(rng, 1000 + i);
    auto r = gradcheck::run(c);
    EXPECT_LT(r.max_rel_error, 1e-5) << "case " << i << " worst " << r.worst;
  }
}
