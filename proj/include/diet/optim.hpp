#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "diet/error.hpp"
#include "diet/matrix.hpp"

namespace diet {

enum class OptimKind { adamw, sgd };

struct OptimConfig {
  OptimKind kind = OptimKind::adamw;
  double base_lr = 0.001;  // at batch size 256
  double weight_decay = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double momentum = 0.9;  // sgd only
  std::size_t warmup_epochs = 10;
  std::size_t total_epochs = 300;
  std::size_t batch_size = 256;
  double final_lr = 0.0;

  // "default": lr/wd 0.001/0.05 (non-transformer encoders).
  // "transformer": lr/wd 0.0002/0.01.
  static OptimConfig preset(std::string_view name) {
    OptimConfig c;
    if (name == "default") return c;
    if (name == "transformer") {
      c.base_lr = 0.0002;
      c.weight_decay = 0.01;
      return c;
    }
    throw ConfigError("unknown optimizer preset '" + std::string(name) + "'");
  }

  void validate() const {
    if (!(base_lr > 0.0)) throw ConfigError("base_lr must be > 0");
    if (warmup_epochs > total_epochs) {
      throw ConfigError("warmup_epochs must not exceed total_epochs");
    }
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
      throw ConfigError("betas must lie in [0, 1)");
    }
    if (!(eps > 0.0)) throw ConfigError("eps must be > 0");
    if (!(final_lr >= 0.0)) throw ConfigError("final_lr must be >= 0");
  }

  bool operator==(const OptimConfig&) const = default;
};

// Linear scaling rule: base_lr * bs / 256.
inline double scaled_lr(const OptimConfig& cfg) {
  return cfg.base_lr * static_cast<double>(cfg.batch_size) / 256.0;
}

// Per-step schedule: linear ramp 0 -> peak over the warmup steps, then half
// cosine from peak to final_lr over the remaining steps.
inline double lr_at(const OptimConfig& cfg, std::uint64_t step,
                    std::uint64_t steps_per_epoch) {
  const double peak = scaled_lr(cfg);
  const std::uint64_t warm = cfg.warmup_epochs * steps_per_epoch;
  const std::uint64_t total = cfg.total_epochs * steps_per_epoch;
  if (step < warm) {
    return peak * static_cast<double>(step) / static_cast<double>(warm);
  }
  if (total <= warm) return step >= total && total > 0 ? cfg.final_lr : peak;
  const double progress = std::min(
      1.0, static_cast<double>(step - warm) / static_cast<double>(total - warm));
  return cfg.final_lr + (peak - cfg.final_lr) * 0.5 *
                            (1.0 + std::cos(std::numbers::pi * progress));
}

// Moments (adamw) or velocity (sgd, in `first`) per parameter tensor.
struct OptimState {
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first;
  std::vector<std::vector<double>> second;

  bool operator==(const OptimState&) const = default;
};

namespace detail {

inline void ensure_slots(OptimState& st, std::span<const std::span<double>> params,
                         bool need_second) {
  if (st.first.empty()) {
    for (auto p : params) {
      st.first.emplace_back(p.size(), 0.0);
      if (need_second) st.second.emplace_back(p.size(), 0.0);
    }
  }
  if (st.first.size() != params.size() ||
      (need_second && st.second.size() != params.size())) {
    throw DimensionError("optimizer state has a different number of tensors");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (st.first[i].size() != params[i].size() ||
        (need_second && st.second[i].size() != params[i].size())) {
      throw DimensionError("optimizer state shape mismatch at tensor " +
                           std::to_string(i));
    }
  }
}

inline void check_grads(std::span<const std::span<double>> params,
                        std::span<const std::span<const double>> grads) {
  if (params.size() != grads.size()) {
    throw DimensionError("params/grads tensor count mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size() != grads[i].size()) {
      throw DimensionError("params/grads shape mismatch at tensor " +
                           std::to_string(i));
    }
  }
}

}  // namespace detail

// One AdamW update of a single tensor at (1-based) step t. Decay is decoupled:
//   p <- p - lr * mhat / (sqrt(vhat) + eps) - lr * wd * p
inline void adamw_update(std::span<double> p, std::span<const double> g,
                         std::span<double> m, std::span<double> v, std::uint64_t t,
                         double lr, const OptimConfig& cfg) {
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  const double wd = cfg.weight_decay;
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    p[i] = p[i] - lr * (mhat / (std::sqrt(vhat) + cfg.eps)) - lr * wd * p[i];
  }
}

inline void adamw_step(std::span<const std::span<double>> params,
                       std::span<const std::span<const double>> grads,
                       OptimState& st, double lr, const OptimConfig& cfg) {
  detail::check_grads(params, grads);
  detail::ensure_slots(st, params, true);
  ++st.step;
  for (std::size_t i = 0; i < params.size(); ++i) {
    adamw_update(params[i], grads[i], st.first[i], st.second[i], st.step, lr, cfg);
  }
}

// velocity <- momentum * velocity + g;  p <- p - lr * velocity
inline void sgd_step(std::span<const std::span<double>> params,
                     std::span<const std::span<const double>> grads,
                     OptimState& st, double lr, const OptimConfig& cfg) {
  detail::check_grads(params, grads);
  detail::ensure_slots(st, params, false);
  ++st.step;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i];
    auto g = grads[i];
    auto& vel = st.first[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      vel[j] = cfg.momentum * vel[j] + g[j];
      p[j] -= lr * vel[j];
    }
  }
}

inline void optimizer_step(std::span<const std::span<double>> params,
                           std::span<const std::span<const double>> grads,
                           OptimState& st, double lr, const OptimConfig& cfg) {
  if (cfg.kind == OptimKind::adamw) {
    adamw_step(params, grads, st, lr, cfg);
  } else {
    sgd_step(params, grads, st, lr, cfg);
  }
}

// Row-sparse update of a class-major matrix: only `rows` are touched (moment
// decay and weight decay included), the step counter still advances once.
// This is the "lazy" variant used with sampled softmax.
inline void optimizer_step_rows(Matrix& w, const Matrix& grad_rows,
                                std::span<const std::size_t> rows, OptimState& st,
                                double lr, const OptimConfig& cfg) {
  if (grad_rows.rows() != rows.size() || grad_rows.cols() != w.cols()) {
    throw DimensionError("optimizer_step_rows: gradient rows " +
                         shape_str(grad_rows) + " vs W " + shape_str(w));
  }
  std::span<double> whole = w.values();
  const bool adam = cfg.kind == OptimKind::adamw;
  detail::ensure_slots(st, std::span<const std::span<double>>(&whole, 1), adam);
  ++st.step;
  const std::size_t k = w.cols();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= w.rows()) throw DimensionError("row index out of range");
    const std::size_t off = rows[i] * k;
    auto p = whole.subspan(off, k);
    auto g = grad_rows.row(i);
    auto m = std::span<double>(st.first[0]).subspan(off, k);
    if (adam) {
      auto v = std::span<double>(st.second[0]).subspan(off, k);
      adamw_update(p, g, m, v, st.step, lr, cfg);
    } else {
      for (std::size_t j = 0; j < k; ++j) {
        m[j] = cfg.momentum * m[j] + g[j];
        p[j] -= lr * m[j];
      }
    }
  }
}

}  // namespace diet
