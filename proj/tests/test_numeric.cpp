#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "diet/matrix.hpp"
#include "diet/rng.hpp"
#include "oracles.hpp"

using namespace diet;

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  Rng rng(3);
  Matrix m = oracle::random_matrix(3, 4, rng);
  EXPECT_EQ(matmul(Matrix::identity(3), m), m);
}

TEST(Matmul, HandComputed) {
  Matrix a{{1, 2}, {3, 4}};
  Matrix b{{5}, {6}};
  EXPECT_EQ(matmul(a, b), (Matrix{{17}, {39}}));
}

TEST(Matmul, MatchesTripleLoopOracle) {
  Rng rng(7);
  Matrix a = oracle::random_matrix(7, 5, rng);
  Matrix b = oracle::random_matrix(5, 3, rng);
  EXPECT_LT(oracle::max_abs_diff(matmul(a, b), oracle::triple_loop_matmul(a, b)), 1e-12);
}

TEST(Matmul, BlockedKernelIsBitIdenticalToTripleLoop) {
  // Shapes straddle the 8x8 tile edges.
  Rng rng(11);
  for (auto [m, k, n] : {std::tuple{17, 9, 23}, {8, 64, 8}, {3, 2, 1}, {33, 1, 40}}) {
    Matrix a = oracle::random_matrix(m, k, rng);
    Matrix b = oracle::random_matrix(k, n, rng);
    EXPECT_EQ(matmul(a, b), oracle::triple_loop_matmul(a, b)) << m << "x" << k << "x" << n;
  }
}

TEST(Matmul, ParallelPathIsBitIdentical) {
  Rng rng(5);
  Matrix a = oracle::random_matrix(37, 19, rng);
  Matrix b = oracle::random_matrix(19, 29, rng);
  const Matrix serial = matmul(a, b);
  for (unsigned t : {1u, 2u, 3u, 8u}) EXPECT_EQ(matmul_parallel(a, b, t), serial);
}

TEST(Matmul, DimensionMismatchThrows) {
  EXPECT_THROW(matmul(Matrix(2, 3), Matrix(2, 3)), DimensionError);
  EXPECT_THROW(matmul_bt(Matrix(2, 3), Matrix(2, 4)), DimensionError);
  EXPECT_THROW(matmul_at(Matrix(2, 3), Matrix(3, 3)), DimensionError);
}

TEST(Matmul, TransposedVariantsAgreeWithOracle) {
  Rng rng(9);
  Matrix a = oracle::random_matrix(6, 4, rng);
  Matrix b = oracle::random_matrix(5, 4, rng);
  Matrix c = oracle::random_matrix(6, 3, rng);
  EXPECT_LT(oracle::max_abs_diff(matmul_bt(a, b),
                                 oracle::triple_loop_matmul(a, transpose(b))), 1e-12);
  EXPECT_LT(oracle::max_abs_diff(matmul_at(a, c),
                                 oracle::triple_loop_matmul(transpose(a), c)), 1e-12);
}

TEST(Matmul, AssociativityOnRandomTriples) {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 1 + rng.below(9), k = 1 + rng.below(9), p = 1 + rng.below(9),
                      n = 1 + rng.below(9);
    Matrix a = oracle::random_matrix(m, k, rng);
    Matrix b = oracle::random_matrix(k, p, rng);
    Matrix c = oracle::random_matrix(p, n, rng);
    Matrix left = matmul(matmul(a, b), c);
    Matrix right = matmul(a, matmul(b, c));
    double scale = 0.0;
    for (double v : left.values()) scale = std::max(scale, std::abs(v));
    EXPECT_LE(oracle::max_abs_diff(left, right), 1e-9 * std::max(scale, 1.0));
  }
}

TEST(Matmul, NonFiniteResultIsReported) {
  Matrix a{{1e200, 1e200}};
  Matrix b{{1e200}, {1e200}};
  EXPECT_THROW(matmul(a, b), NumericError);
}

TEST(Softmax, EqualRowIsUniform) {
  Matrix z(1, 7, 3.25);
  Matrix p = softmax_rows(z);
  for (double v : p.values()) EXPECT_DOUBLE_EQ(v, 1.0 / 7.0);
}

TEST(Softmax, LargeLogitsDoNotOverflow) {
  Matrix p = softmax_rows(Matrix{{1000.0, 0.0}});
  EXPECT_EQ(p(0, 0), 1.0);
  EXPECT_GE(p(0, 1), 0.0);
  EXPECT_LT(p(0, 1), 1e-300);
}

TEST(Softmax, RowsSumToOne) {
  Rng rng(1);
  Matrix p = softmax_rows(oracle::random_matrix(4, 6, rng, 3.0));
  for (std::size_t r = 0; r < 4; ++r) {
    double s = 0.0;
    for (double v : p.row(r)) s += v;
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Softmax, ShiftInvariant) {
  Rng rng(2);
  Matrix z = oracle::random_matrix(5, 9, rng, 2.0);
  Matrix shifted = z;
  for (std::size_t r = 0; r < z.rows(); ++r) {
    const double c = 100.0 * rng.normal();
    for (double& v : shifted.row(r)) v += c;
  }
  EXPECT_LT(oracle::max_abs_diff(softmax_rows(z), softmax_rows(shifted)), 1e-12);
}

TEST(Softmax, RejectsNonFiniteInput) {
  EXPECT_THROW(softmax_rows(Matrix{{0.0, NAN}}), NumericError);
}

TEST(Relu, NegativeInputGivesZeroForwardAndBackward) {
  Matrix z(3, 4, -1.5);
  auto r = relu_forward(z);
  for (double v : r.out.values()) EXPECT_EQ(v, 0.0);
  Matrix g = relu_backward(Matrix(3, 4, 2.0), r.mask);
  for (double v : g.values()) EXPECT_EQ(v, 0.0);
}

TEST(Relu, PositiveInputIsIdentity) {
  Rng rng(4);
  Matrix z = oracle::random_matrix(3, 3, rng);
  for (double& v : z.values()) v = std::abs(v) + 0.1;
  auto r = relu_forward(z);
  EXPECT_EQ(r.out, z);
  Matrix g = oracle::random_matrix(3, 3, rng);
  EXPECT_EQ(relu_backward(g, r.mask), g);
}

TEST(Relu, BackwardShapeMismatchThrows) {
  EXPECT_THROW(relu_backward(Matrix(2, 2), Matrix(2, 3)), DimensionError);
}

TEST(Relu, CompositeGradientMatchesFiniteDifferences) {
  // L(W) = sum_i c_i * relu(W x)_i, checked away from kinks.
  Rng rng(21);
  Matrix w = oracle::random_matrix(5, 4, rng);
  Matrix x = oracle::random_matrix(4, 1, rng);
  Matrix c = oracle::random_matrix(5, 1, rng);
  auto loss = [&] {
    auto r = relu_forward(matmul(w, x));
    double s = 0.0;
    for (std::size_t i = 0; i < 5; ++i) s += c(i, 0) * r.out(i, 0);
    return s;
  };
  Matrix pre = matmul(w, x);
  for (double v : pre.values()) ASSERT_GT(std::abs(v), 1e-3);
  auto r = relu_forward(pre);
  Matrix gpre = relu_backward(c, r.mask);
  Matrix gw = matmul_bt(gpre, x);
  for (std::size_t i = 0; i < w.rows(); ++i)
    for (std::size_t j = 0; j < w.cols(); ++j) {
      const double num = oracle::central_difference(&w(i, j), 1e-6, loss);
      EXPECT_LT(oracle::relative_error(gw(i, j), num), 1e-6) << i << "," << j;
    }
}

TEST(Determinism, RepeatedOperationsAreBitIdentical) {
  Rng rng(8);
  Matrix a = oracle::random_matrix(13, 11, rng);
  Matrix b = oracle::random_matrix(11, 9, rng);
  EXPECT_EQ(checksum(matmul(a, b).values()), checksum(matmul(a, b).values()));
  EXPECT_EQ(softmax_rows(a), softmax_rows(a));
  EXPECT_EQ(relu_forward(a).out, relu_forward(a).out);
}

TEST(Rng, KnownSequenceForSeedZero) {
  // xoshiro256** seeded through SplitMix64(0); first outputs are fixed forever.
  Rng a(0), b(0);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
  Rng c(0);
  EXPECT_EQ(c.next_u64(), 0x99EC5F36CB75F2B4ULL);
}

TEST(Rng, DerivedStreamsDifferAndReproduce) {
  Rng s1 = Rng::derive(42, {1, 2});
  Rng s2 = Rng::derive(42, {1, 3});
  Rng s3 = Rng::derive(42, {1, 2});
  const auto x = s1.next_u64();
  EXPECT_NE(x, s2.next_u64());
  EXPECT_EQ(x, s3.next_u64());
}

TEST(Rng, StateRoundTripResumesSequence) {
  Rng r(77);
  for (int i = 0; i < 5; ++i) r.next_u64();
  auto st = r.state();
  EXPECT_EQ(st.position, 5u);
  EXPECT_EQ(st.algorithm, "xoshiro256**");
  Rng resumed = Rng::from_state(st);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(r.next_u64(), resumed.next_u64());
}

TEST(Rng, BelowIsInRangeAndCoversValues) {
  Rng r(3);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    auto v = r.below(7);
    ASSERT_LT(v, 7u);
    seen.insert(v);
  }
  EXPECT_EQ(seen.size(), 7u);
}

TEST(Rng, NormalMomentsAreStandard) {
  Rng r(10);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    s += x;
    s2 += x * x;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}
