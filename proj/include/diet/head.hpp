#pragma once

// The N-way bias-free linear classifier over sample indices and its
// label-smoothed cross-entropy:
//   q_c   = (1 - alpha) [c == n] + alpha / N
//   loss  = mean_b  -sum_c q_c log softmax(z_b)_c
//         = mean_b  lse(z_b) - (1 - alpha) z_bn - (alpha / N) sum_c z_bc
//   dL/dz = (softmax(z) - q) / B
// W is stored class-major (N x K) so that a candidate subset of classes is a
// set of contiguous rows.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "diet/error.hpp"
#include "diet/matrix.hpp"
#include "diet/rng.hpp"

namespace diet {

struct DietHead {
  Matrix weight;  // N x K, no bias anywhere
  double alpha = 0.8;

  std::size_t n_classes() const noexcept { return weight.rows(); }
  std::size_t feature_dim() const noexcept { return weight.cols(); }

  bool operator==(const DietHead&) const = default;
};

inline void validate_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) {
    throw SpecError("label smoothing must lie in [0, 1)");
  }
}

// Uniform(-1/sqrt(K), 1/sqrt(K)) entries, the usual fan-in rule of a linear
// layer.
inline DietHead init_head(std::size_t n_classes, std::size_t feature_dim,
                          std::uint64_t seed, double alpha = 0.8) {
  if (n_classes < 1 || feature_dim < 1) {
    throw SpecError("head needs N >= 1 and K >= 1");
  }
  validate_alpha(alpha);
  DietHead head{Matrix(n_classes, feature_dim), alpha};
  const double bound = 1.0 / std::sqrt(static_cast<double>(feature_dim));
  Rng rng = Rng::derive(seed, {0x4EAD});
  for (double& v : head.weight.values()) v = rng.uniform(-bound, bound);
  return head;
}

inline Matrix logits(const DietHead& head, const Matrix& features) {
  if (features.cols() != head.feature_dim()) {
    throw DimensionError("head logits: features are " + shape_str(features) +
                         ", head expects K=" + std::to_string(head.feature_dim()));
  }
  return matmul_bt(features, head.weight);
}

struct XentResult {
  double loss = 0.0;
  Matrix grad_logits;
};

namespace detail {

// `cols[b]` is the column of row b's hot class inside `z`; smoothing mass is
// spread over all z.cols() columns.
inline XentResult smoothed_xent(const Matrix& z, std::span<const std::size_t> cols,
                                double alpha) {
  const std::size_t batch = z.rows();
  const std::size_t n = z.cols();
  if (cols.size() != batch) {
    throw DimensionError("xent: " + std::to_string(cols.size()) + " targets for " +
                         std::to_string(batch) + " rows");
  }
  if (batch == 0 || n == 0) throw DimensionError("xent: empty logits");
  validate_alpha(alpha);
  require_finite(z, "xent logits");

  XentResult res{0.0, Matrix(batch, n)};
  const double spread = alpha / static_cast<double>(n);
  const double inv_b = 1.0 / static_cast<double>(batch);
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    auto zr = z.row(b);
    auto gr = res.grad_logits.row(b);
    const double mx = *std::max_element(zr.begin(), zr.end());
    double sum = 0.0;
    double zsum = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      gr[c] = std::exp(zr[c] - mx);
      sum += gr[c];
      zsum += zr[c];
    }
    const double lse = mx + std::log(sum);
    total += lse - (1.0 - alpha) * zr[cols[b]] - spread * zsum;
    for (std::size_t c = 0; c < n; ++c) {
      gr[c] = (gr[c] / sum - spread) * inv_b;
    }
    gr[cols[b]] -= (1.0 - alpha) * inv_b;
  }
  res.loss = total * inv_b;
  return res;
}

}  // namespace detail

inline XentResult xent_smoothed(const Matrix& logit_matrix,
                                std::span<const std::size_t> targets, double alpha) {
  for (auto t : targets) {
    if (t >= logit_matrix.cols()) {
      throw TargetError("target " + std::to_string(t) + " outside [0, " +
                        std::to_string(logit_matrix.cols()) + ")");
    }
  }
  return detail::smoothed_xent(logit_matrix, targets, alpha);
}

struct HeadGrads {
  Matrix grad_weight;    // N x K (or |candidates| x K for the sampled path)
  Matrix grad_features;  // B x K
};

inline HeadGrads head_backward(const DietHead& head, const Matrix& features,
                               const Matrix& grad_logits) {
  if (features.cols() != head.feature_dim() ||
      grad_logits.cols() != head.n_classes() ||
      grad_logits.rows() != features.rows()) {
    throw DimensionError("head_backward: features " + shape_str(features) +
                         ", grad_logits " + shape_str(grad_logits) + ", W " +
                         shape_str(head.weight));
  }
  return {matmul_at(grad_logits, features), matmul(grad_logits, head.weight)};
}

// ---- Sampled softmax -------------------------------------------------------

// Produces a sorted, duplicate-free candidate class set that contains every
// batch target.
using CandidateStrategy = std::function<std::vector<std::size_t>(
    std::span<const std::size_t> targets, std::size_t n_classes, Rng& rng)>;

// Batch targets plus classes drawn uniformly without replacement from the
// rest, up to `n_candidates` in total (or all N when n_candidates >= N).
inline CandidateStrategy uniform_negatives(std::size_t n_candidates) {
  return [n_candidates](std::span<const std::size_t> targets, std::size_t n_classes,
                        Rng& rng) {
    std::vector<std::size_t> chosen(targets.begin(), targets.end());
    std::sort(chosen.begin(), chosen.end());
    chosen.erase(std::unique(chosen.begin(), chosen.end()), chosen.end());
    if (n_candidates >= n_classes) {
      std::vector<std::size_t> all(n_classes);
      for (std::size_t c = 0; c < n_classes; ++c) all[c] = c;
      return all;
    }
    if (chosen.size() >= n_candidates) return chosen;
    const std::size_t need = n_candidates - chosen.size();
    const std::size_t pool = n_classes - chosen.size();
    if (need * 2 > pool) {
      // Dense regime: shuffle the complement.
      std::vector<std::size_t> rest;
      rest.reserve(pool);
      for (std::size_t c = 0, t = 0; c < n_classes; ++c) {
        if (t < chosen.size() && chosen[t] == c) {
          ++t;
        } else {
          rest.push_back(c);
        }
      }
      for (std::size_t i = 0; i < need; ++i) {
        std::swap(rest[i], rest[i + rng.below(rest.size() - i)]);
      }
      chosen.insert(chosen.end(), rest.begin(),
                    rest.begin() + static_cast<std::ptrdiff_t>(need));
      std::sort(chosen.begin(), chosen.end());
      return chosen;
    }
    std::vector<std::size_t> negatives;
    while (negatives.size() < need) {
      const std::size_t c = rng.below(n_classes);
      if (std::binary_search(chosen.begin(), chosen.end(), c)) continue;
      if (std::find(negatives.begin(), negatives.end(), c) != negatives.end()) continue;
      negatives.push_back(c);
    }
    chosen.insert(chosen.end(), negatives.begin(), negatives.end());
    std::sort(chosen.begin(), chosen.end());
    return chosen;
  };
}

struct SampledXent {
  double loss = 0.0;
  Matrix grad_logits;                   // B x |candidates|
  std::vector<std::size_t> candidates;  // sorted class ids
};

inline Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto src = m.row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

// Rows of a |rows| x K gradient placed into an N x K zero matrix.
inline Matrix scatter_rows(const Matrix& grad_rows, std::span<const std::size_t> rows,
                           std::size_t n_rows) {
  Matrix out(n_rows, grad_rows.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto src = grad_rows.row(i);
    std::copy(src.begin(), src.end(), out.row(rows[i]).begin());
  }
  return out;
}

// Cross-entropy restricted to `candidates` (must be sorted, unique, within
// [0, N) and contain every target). Only B x |candidates| logits are ever
// formed. With candidates == [0, N) this is bit-identical to xent_smoothed.
inline SampledXent sampled_xent(const DietHead& head, const Matrix& features,
                                std::span<const std::size_t> targets, double alpha,
                                std::vector<std::size_t> candidates) {
  if (features.cols() != head.feature_dim()) {
    throw DimensionError("sampled_xent: feature width mismatch");
  }
  if (candidates.empty()) throw TargetError("sampled_xent: empty candidate set");
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i] >= head.n_classes() ||
        (i > 0 && candidates[i] <= candidates[i - 1])) {
      throw TargetError("candidates must be sorted, unique and inside [0, N)");
    }
  }
  std::vector<std::size_t> cols(targets.size());
  for (std::size_t b = 0; b < targets.size(); ++b) {
    auto it = std::lower_bound(candidates.begin(), candidates.end(), targets[b]);
    if (it == candidates.end() || *it != targets[b]) {
      throw TargetError("target " + std::to_string(targets[b]) +
                        " missing from the candidate set");
    }
    cols[b] = static_cast<std::size_t>(it - candidates.begin());
  }
  Matrix w_cand = gather_rows(head.weight, candidates);
  Matrix z = matmul_bt(features, w_cand);
  auto res = detail::smoothed_xent(z, cols, alpha);
  return {res.loss, std::move(res.grad_logits), std::move(candidates)};
}

inline SampledXent sampled_xent(const DietHead& head, const Matrix& features,
                                std::span<const std::size_t> targets, double alpha,
                                const CandidateStrategy& strategy, Rng& rng) {
  return sampled_xent(head, features, targets, alpha,
                      strategy(targets, head.n_classes(), rng));
}

// grad_weight rows are aligned with sampled.candidates.
inline HeadGrads sampled_head_backward(const DietHead& head, const Matrix& features,
                                       const SampledXent& sampled) {
  if (sampled.grad_logits.cols() != sampled.candidates.size() ||
      sampled.grad_logits.rows() != features.rows()) {
    throw DimensionError("sampled_head_backward: shape mismatch");
  }
  Matrix w_cand = gather_rows(head.weight, sampled.candidates);
  return {matmul_at(sampled.grad_logits, features),
          matmul(sampled.grad_logits, w_cand)};
}

}  // namespace diet
