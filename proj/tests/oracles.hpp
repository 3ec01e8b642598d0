#pragma once

// Independent reference computations for tests. Nothing here calls the
// library's kernels; each is a direct transcription of the defining formula.

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "diet/encoder.hpp"
#include "diet/matrix.hpp"
#include "diet/rng.hpp"

namespace oracle {

using diet::Matrix;

inline Matrix random_matrix(std::size_t r, std::size_t c, diet::Rng& rng,
                            double scale = 1.0) {
  Matrix m(r, c);
  for (double& v : m.values()) v = scale * rng.normal();
  return m;
}

inline Matrix triple_loop_matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  return m;
}

// -sum_c q_c log p_c with p from exp(z_c) / sum exp(z) computed literally
// (no max shift, no log-sum-exp); only for moderate logits.
inline double direct_smoothed_xent_row(std::span<const double> z, std::size_t target,
                                       double alpha) {
  const double n = static_cast<double>(z.size());
  double denom = 0.0;
  for (double v : z) denom += std::exp(v);
  double loss = 0.0;
  for (std::size_t c = 0; c < z.size(); ++c) {
    const double q = (c == target ? 1.0 - alpha : 0.0) + alpha / n;
    loss -= q * std::log(std::exp(z[c]) / denom);
  }
  return loss;
}

inline double direct_smoothed_xent(const Matrix& z, std::span<const std::size_t> targets,
                                   double alpha) {
  double s = 0.0;
  for (std::size_t b = 0; b < z.rows(); ++b)
    s += direct_smoothed_xent_row(z.row(b), targets[b], alpha);
  return s / static_cast<double>(z.rows());
}

// Straight-line MLP forward: per sample, per unit, explicit sums.
inline Matrix straight_line_forward(const diet::MlpEncoder& enc, const Matrix& x) {
  Matrix out(x.rows(), enc.output_dim());
  for (std::size_t s = 0; s < x.rows(); ++s) {
    std::vector<double> h(x.row(s).begin(), x.row(s).end());
    for (std::size_t l = 0; l < enc.layer_count(); ++l) {
      const auto& w = enc.weights[l];
      std::vector<double> next(w.rows());
      for (std::size_t o = 0; o < w.rows(); ++o) {
        double acc = 0.0;
        for (std::size_t i = 0; i < w.cols(); ++i) acc += w(o, i) * h[i];
        acc += enc.biases[l][o];
        next[o] = (l + 1 < enc.layer_count() && acc < 0.0) ? 0.0 : acc;
      }
      h = std::move(next);
    }
    for (std::size_t k = 0; k < h.size(); ++k) out(s, k) = h[k];
  }
  return out;
}

// Central difference of f with respect to *x, restoring *x afterwards.
inline double central_difference(double* x, double h, const std::function<double()>& f) {
  const double saved = *x;
  *x = saved + h;
  const double fp = f();
  *x = saved - h;
  const double fm = f();
  *x = saved;
  return (fp - fm) / (2.0 * h);
}

// Fourth-order stencil; truncation error O(h^4), so h can be large enough
// that rounding in f stays far below the derivative.
inline double five_point_difference(double* x, double h, const std::function<double()>& f) {
  const double saved = *x;
  double v[4];
  const double offs[4] = {-2.0, -1.0, 1.0, 2.0};
  for (int i = 0; i < 4; ++i) {
    *x = saved + offs[i] * h;
    v[i] = f();
  }
  *x = saved;
  return (v[0] - 8.0 * v[1] + 8.0 * v[2] - v[3]) / (12.0 * h);
}

inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

// One AdamW update on a scalar, transcribed from the textbook equations.
struct ScalarAdamW {
  double theta, m = 0.0, v = 0.0;
  int t = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  void step(double g, double lr, double wd) {
    t += 1;
    m = beta1 * m + (1 - beta1) * g;
    v = beta2 * v + (1 - beta2) * g * g;
    const double m_hat = m / (1 - std::pow(beta1, t));
    const double v_hat = v / (1 - std::pow(beta2, t));
    theta = theta - lr * m_hat / (std::sqrt(v_hat) + eps) - lr * wd * theta;
  }
};

}  // namespace oracle
