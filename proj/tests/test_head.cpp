#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "diet/head.hpp"
#include "oracles.hpp"

using namespace diet;

namespace {

std::vector<std::size_t> random_targets(std::size_t b, std::size_t n, Rng& rng) {
  std::vector<std::size_t> t(b);
  for (auto& v : t) v = rng.below(n);
  return t;
}

}  // namespace

TEST(Logits, ZeroWeightGivesZeroLogits) {
  DietHead head{Matrix(6, 3), 0.8};
  Rng rng(1);
  const Matrix z = logits(head, oracle::random_matrix(4, 3, rng));
  for (double v : z.values()) EXPECT_EQ(v, 0.0);
}

TEST(Logits, SingleFeatureOnesColumnIsConstantPerSample) {
  DietHead head{Matrix(5, 1, 1.0), 0.8};
  Matrix f{{2.5}, {-1.0}};
  Matrix z = logits(head, f);
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 5; ++c) EXPECT_EQ(z(r, c), f(r, 0));
}

TEST(Logits, MatchesTripleLoopOracle) {
  Rng rng(2);
  for (auto [b, k, n] : {std::tuple{3, 4, 5}, {8, 16, 32}, {1, 1, 1}, {7, 3, 11}}) {
    DietHead head = init_head(n, k, 5);
    Matrix f = oracle::random_matrix(b, k, rng);
    EXPECT_LT(oracle::max_abs_diff(logits(head, f),
                                   oracle::triple_loop_matmul(f, transpose(head.weight))),
              1e-12);
  }
}

TEST(Logits, WidthMismatchThrows) {
  EXPECT_THROW(logits(init_head(4, 3, 1), Matrix(2, 4)), DimensionError);
}

TEST(SmoothedXent, ZeroLogitsGiveLogN) {
  for (std::size_t n : {1u, 2u, 10u, 1000u})
    for (double alpha : {0.0, 0.3, 0.8, 0.95}) {
      std::vector<std::size_t> t{0, n - 1};
      auto r = xent_smoothed(Matrix(2, n), t, alpha);
      EXPECT_NEAR(r.loss, std::log(static_cast<double>(n)), 1e-12) << n << " " << alpha;
    }
}

TEST(SmoothedXent, AlphaZeroIsPlainCrossEntropy) {
  Rng rng(3);
  Matrix z = oracle::random_matrix(5, 7, rng, 2.0);
  auto t = random_targets(5, 7, rng);
  double expected = 0.0;
  for (std::size_t b = 0; b < 5; ++b) {
    double denom = 0.0;
    for (double v : z.row(b)) denom += std::exp(v);
    expected -= std::log(std::exp(z(b, t[b])) / denom);
  }
  expected /= 5.0;
  EXPECT_NEAR(xent_smoothed(z, t, 0.0).loss, expected, 1e-12);
}

TEST(SmoothedXent, ThreeClassDirectSummation) {
  Matrix z{{1.0, 2.0, 3.0}};
  std::vector<std::size_t> t{2};
  const double direct = oracle::direct_smoothed_xent_row(z.row(0), 2, 0.8);
  EXPECT_NEAR(xent_smoothed(z, t, 0.8).loss, direct, 1e-12);
}

TEST(SmoothedXent, MatchesDirectSummationOnRandomBatches) {
  Rng rng(4);
  for (int i = 0; i < 20; ++i) {
    const std::size_t b = 1 + rng.below(8), n = 1 + rng.below(40);
    Matrix z = oracle::random_matrix(b, n, rng, 3.0);
    auto t = random_targets(b, n, rng);
    const double alpha = rng.uniform(0.0, 0.99);
    EXPECT_NEAR(xent_smoothed(z, t, alpha).loss, oracle::direct_smoothed_xent(z, t, alpha),
                1e-12);
  }
}

TEST(SmoothedXent, GradMatchesFiniteDifferences) {
  Rng rng(5);
  for (double alpha : {0.0, 0.4, 0.8}) {
    Matrix z = oracle::random_matrix(4, 9, rng);
    auto t = random_targets(4, 9, rng);
    auto r = xent_smoothed(z, t, alpha);
    for (std::size_t i = 0; i < z.rows(); ++i)
      for (std::size_t j = 0; j < z.cols(); ++j) {
        const double num = oracle::central_difference(
            &z(i, j), 1e-5, [&] { return oracle::direct_smoothed_xent(z, t, alpha); });
        EXPECT_LT(oracle::relative_error(r.grad_logits(i, j), num), 1e-7)
            << alpha << " " << i << "," << j;
      }
  }
}

TEST(SmoothedXent, ShiftInvariance) {
  Rng rng(6);
  Matrix z = oracle::random_matrix(6, 12, rng, 2.0);
  auto t = random_targets(6, 12, rng);
  Matrix s = z;
  for (std::size_t r = 0; r < s.rows(); ++r) {
    const double c = rng.uniform(-50.0, 50.0);
    for (double& v : s.row(r)) v += c;
  }
  auto a = xent_smoothed(z, t, 0.8), b = xent_smoothed(s, t, 0.8);
  EXPECT_NEAR(a.loss, b.loss, 1e-10);
  EXPECT_LT(oracle::max_abs_diff(a.grad_logits, b.grad_logits), 1e-10);
}

TEST(SmoothedXent, GradRowsSumToZero) {
  Rng rng(7);
  Matrix z = oracle::random_matrix(8, 30, rng, 4.0);
  auto t = random_targets(8, 30, rng);
  auto r = xent_smoothed(z, t, 0.8);
  for (std::size_t b = 0; b < 8; ++b) {
    double s = 0.0;
    for (double v : r.grad_logits.row(b)) s += v;
    EXPECT_NEAR(s, 0.0, 1e-12);
  }
}

TEST(SmoothedXent, NonDecreasingInAlphaWhenTargetLeads) {
  Rng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix z = oracle::random_matrix(1, 10, rng);
    const std::size_t n = rng.below(10);
    z(0, n) = 1.0 + *std::max_element(z.row(0).begin(), z.row(0).end());
    std::vector<std::size_t> t{n};
    double prev = -INFINITY;
    for (double a = 0.0; a < 1.0; a += 0.05) {
      const double l = xent_smoothed(z, t, a).loss;
      EXPECT_GE(l, prev);
      prev = l;
    }
  }
}

TEST(SmoothedXent, OutOfRangeTargetThrows) {
  std::vector<std::size_t> t{3};
  EXPECT_THROW(xent_smoothed(Matrix(1, 3), t, 0.8), TargetError);
  EXPECT_THROW(init_head(3, 2, 1, 1.0), SpecError);
}

TEST(HeadBackward, ZeroUpstreamGivesZero) {
  DietHead head = init_head(5, 3, 1);
  Rng rng(9);
  auto g = head_backward(head, oracle::random_matrix(2, 3, rng), Matrix(2, 5));
  for (double v : g.grad_weight.values()) EXPECT_EQ(v, 0.0);
  for (double v : g.grad_features.values()) EXPECT_EQ(v, 0.0);
}

TEST(HeadBackward, ScalarCase) {
  DietHead head{Matrix{{1.5}}, 0.0};
  auto g = head_backward(head, Matrix{{2.0}}, Matrix{{-0.25}});
  EXPECT_EQ(g.grad_weight(0, 0), -0.5);
  EXPECT_EQ(g.grad_features(0, 0), -0.375);
}

TEST(HeadBackward, WeightGradMatchesFiniteDifferences) {
  Rng rng(10);
  DietHead head = init_head(7, 4, 3);
  Matrix f = oracle::random_matrix(5, 4, rng);
  auto t = random_targets(5, 7, rng);
  auto xe = xent_smoothed(logits(head, f), t, 0.8);
  auto g = head_backward(head, f, xe.grad_logits);
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      const double num = oracle::central_difference(&head.weight(i, j), 1e-6, [&] {
        return xent_smoothed(logits(head, f), t, 0.8).loss;
      });
      EXPECT_LT(oracle::relative_error(g.grad_weight(i, j), num), 1e-6);
    }
}

TEST(HeadBackward, ShapeMismatchThrows) {
  DietHead head = init_head(5, 3, 1);
  EXPECT_THROW(head_backward(head, Matrix(2, 3), Matrix(2, 4)), DimensionError);
}

TEST(SampledXent, AllClassesIsBitIdenticalToFullHead) {
  Rng rng(11);
  for (int i = 0; i < 50; ++i) {
    const std::size_t n = 1 + rng.below(40), k = 1 + rng.below(10), b = 1 + rng.below(8);
    DietHead head = init_head(n, k, 100 + i, 0.8);
    Matrix f = oracle::random_matrix(b, k, rng);
    auto t = random_targets(b, n, rng);
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    auto full = xent_smoothed(logits(head, f), t, 0.8);
    auto fg = head_backward(head, f, full.grad_logits);
    auto s = sampled_xent(head, f, t, 0.8, all);
    auto sg = sampled_head_backward(head, f, s);
    ASSERT_EQ(s.loss, full.loss);
    ASSERT_EQ(s.grad_logits, full.grad_logits);
    ASSERT_EQ(sg.grad_weight, fg.grad_weight);
    ASSERT_EQ(sg.grad_features, fg.grad_features);
  }
}

TEST(SampledXent, SingletonCandidateWithoutSmoothingHasZeroLoss) {
  DietHead head = init_head(10, 3, 1, 0.0);
  Rng rng(12);
  std::vector<std::size_t> t{4};
  auto s = sampled_xent(head, oracle::random_matrix(1, 3, rng), t, 0.0, {4});
  EXPECT_EQ(s.loss, 0.0);
}

TEST(SampledXent, GradientTouchesOnlyCandidateRows) {
  Rng rng(13);
  const std::size_t n = 1024, k = 8, b = 8;
  DietHead head = init_head(n, k, 2);
  Matrix f = oracle::random_matrix(b, k, rng);
  auto t = random_targets(b, n, rng);
  auto s = sampled_xent(head, f, t, 0.8, uniform_negatives(64), rng);
  EXPECT_EQ(s.candidates.size(), 64u);
  EXPECT_TRUE(std::is_sorted(s.candidates.begin(), s.candidates.end()));
  for (auto tt : t) EXPECT_TRUE(std::binary_search(s.candidates.begin(), s.candidates.end(), tt));
  auto g = sampled_head_backward(head, f, s);
  Matrix dense = scatter_rows(g.grad_weight, s.candidates, n);
  std::size_t nonzero_rows = 0;
  for (std::size_t r = 0; r < n; ++r) {
    const bool cand = std::binary_search(s.candidates.begin(), s.candidates.end(), r);
    bool any = false;
    for (double v : dense.row(r)) any |= v != 0.0;
    if (!cand) {
      EXPECT_FALSE(any) << r;
    }
    nonzero_rows += any;
  }
  EXPECT_GT(nonzero_rows, 0u);
}

TEST(SampledXent, SmoothingSpreadsOverCandidates) {
  // q over candidates is (1-a)[c==n] + a/|cand|: zero logits give ln|cand|.
  DietHead head{Matrix(100, 2), 0.8};
  std::vector<std::size_t> t{3};
  auto s = sampled_xent(head, Matrix(1, 2), t, 0.8, {1, 3, 50, 99});
  EXPECT_NEAR(s.loss, std::log(4.0), 1e-15);
}

TEST(SampledXent, MissingTargetOrBadSetThrows) {
  DietHead head = init_head(10, 2, 1);
  std::vector<std::size_t> t{5};
  EXPECT_THROW(sampled_xent(head, Matrix(1, 2), t, 0.8, {1, 2}), TargetError);
  EXPECT_THROW(sampled_xent(head, Matrix(1, 2), t, 0.8, {5, 2}), TargetError);
  EXPECT_THROW(sampled_xent(head, Matrix(1, 2), t, 0.8, {5, 10}), TargetError);
}

TEST(UniformNegatives, DenseRegimeAndFullSet) {
  Rng rng(14);
  std::vector<std::size_t> t{0, 9, 9};
  auto dense = uniform_negatives(8)(t, 10, rng);
  EXPECT_EQ(dense.size(), 8u);
  EXPECT_TRUE(std::adjacent_find(dense.begin(), dense.end()) == dense.end());
  auto all = uniform_negatives(64)(t, 10, rng);
  EXPECT_EQ(all.size(), 10u);
}

TEST(InitHead, DeterministicAndBounded) {
  EXPECT_EQ(init_head(20, 9, 3), init_head(20, 9, 3));
  auto h = init_head(20, 9, 3);
  for (double v : h.weight.values()) {
    EXPECT_GE(v, -1.0 / 3.0);
    EXPECT_LE(v, 1.0 / 3.0);
  }
  EXPECT_THROW(init_head(0, 3, 1), SpecError);
}

TEST(InitHead, MeanWithinThreeSigmaOfZero) {
  auto h = init_head(1000, 1000, 7);
  double s = 0.0;
  for (double v : h.weight.values()) s += v;
  const double n = 1e6;
  const double bound = 1.0 / std::sqrt(1000.0);
  const double sigma = bound / std::sqrt(3.0) / std::sqrt(n);
  EXPECT_LT(std::abs(s / n), 3.0 * sigma);
}
