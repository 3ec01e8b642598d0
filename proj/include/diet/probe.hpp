#pragma once

// Linear evaluation of frozen features: multinomial logistic regression fit
// by gradient descent with an L2 penalty on the weights (not the bias).
// Features are standardised per column while fitting and the affine map is
// folded back into the returned weights, so the model applies to raw
// features.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "diet/dataset.hpp"
#include "diet/encoder.hpp"
#include "diet/error.hpp"
#include "diet/matrix.hpp"

namespace diet {

struct ProbeConfig {
  double l2_penalty = 1e-4;
  std::size_t epochs = 300;  // full-batch iterations when batch_size == 0
  double lr = 0.5;
  std::size_t batch_size = 0;  // 0: full batch

  void validate() const {
    if (!(l2_penalty >= 0.0)) throw ConfigError("probe l2_penalty must be >= 0");
    if (!(lr > 0.0)) throw ConfigError("probe lr must be > 0");
  }

  bool operator==(const ProbeConfig&) const = default;
};

struct ProbeModel {
  Matrix weights;            // C x K
  std::vector<double> bias;  // C
};

// Clean (non-augmented) features of every sample; the encoder is only read.
inline Matrix extract_features(const MlpEncoder& enc, const IndexedDataset& ds) {
  if (ds.dim() != enc.input_dim()) {
    throw DimensionError("extract_features: dataset dim " + std::to_string(ds.dim()) +
                         " != encoder input " + std::to_string(enc.input_dim()));
  }
  constexpr std::size_t kChunk = 512;
  Matrix out(ds.size(), enc.output_dim());
  for (std::size_t lo = 0; lo < ds.size(); lo += kChunk) {
    const std::size_t hi = std::min(ds.size(), lo + kChunk);
    Matrix x(hi - lo, ds.dim());
    std::copy(ds.features().data() + lo * ds.dim(), ds.features().data() + hi * ds.dim(),
              x.data());
    Matrix f = encode(enc, x);
    std::copy(f.values().begin(), f.values().end(), out.data() + lo * out.cols());
  }
  return out;
}

inline Matrix probe_logits(const ProbeModel& model, const Matrix& features) {
  if (features.cols() != model.weights.cols()) {
    throw DimensionError("probe: features are " + shape_str(features) +
                         ", model expects K=" + std::to_string(model.weights.cols()));
  }
  Matrix z = matmul_bt(features, model.weights);
  for (std::size_t r = 0; r < z.rows(); ++r) {
    auto row = z.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += model.bias[c];
  }
  return z;
}

// Fraction of rows whose argmax (lowest index on ties) equals the label.
inline double top1_accuracy_from_logits(const Matrix& z,
                                        std::span<const std::uint32_t> labels) {
  if (z.rows() != labels.size()) {
    throw DimensionError("top1_accuracy: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(z.rows()) + " rows");
  }
  if (z.rows() == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < z.rows(); ++r) {
    auto row = z.row(r);
    const auto best = static_cast<std::size_t>(
        std::max_element(row.begin(), row.end()) - row.begin());
    if (best == labels[r]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(z.rows());
}

inline double top1_accuracy(const ProbeModel& model, const Matrix& features,
                            std::span<const std::uint32_t> labels) {
  return top1_accuracy_from_logits(probe_logits(model, features), labels);
}

// `n_classes == 0` infers C = max(label) + 1. If `loss_trace` is given it
// receives the penalised training objective before every update and once
// after the last one.
inline ProbeModel fit_probe(const Matrix& features, std::span<const std::uint32_t> labels,
                            const ProbeConfig& cfg, std::size_t n_classes = 0,
                            std::vector<double>* loss_trace = nullptr) {
  cfg.validate();
  const std::size_t n = features.rows();
  const std::size_t k = features.cols();
  if (labels.size() != n) throw DimensionError("fit_probe: label count mismatch");
  if (n == 0) throw DimensionError("fit_probe: no samples");
  if (n_classes == 0) n_classes = *std::max_element(labels.begin(), labels.end()) + 1u;
  for (auto l : labels) {
    if (l >= n_classes) throw TargetError("probe label outside [0, C)");
  }

  std::vector<double> mean(k, 0.0), scale(k, 1.0);
  for (std::size_t r = 0; r < n; ++r) {
    auto row = features.row(r);
    for (std::size_t j = 0; j < k; ++j) mean[j] += row[j];
  }
  for (double& m : mean) m /= static_cast<double>(n);
  std::vector<double> var(k, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    auto row = features.row(r);
    for (std::size_t j = 0; j < k; ++j) var[j] += (row[j] - mean[j]) * (row[j] - mean[j]);
  }
  for (std::size_t j = 0; j < k; ++j) {
    const double sd = std::sqrt(var[j] / static_cast<double>(n));
    scale[j] = sd > 1e-12 ? sd : 1.0;
  }
  Matrix z(n, k);
  for (std::size_t r = 0; r < n; ++r) {
    auto src = features.row(r);
    auto dst = z.row(r);
    for (std::size_t j = 0; j < k; ++j) dst[j] = (src[j] - mean[j]) / scale[j];
  }

  ProbeModel std_model{Matrix(n_classes, k), std::vector<double>(n_classes, 0.0)};
  const std::size_t bs = cfg.batch_size == 0 ? n : std::min(cfg.batch_size, n);

  auto objective_and_step = [&](std::size_t lo, std::size_t hi, bool update) {
    const std::size_t b = hi - lo;
    Matrix zb(b, k);
    std::copy(z.data() + lo * k, z.data() + hi * k, zb.data());
    Matrix p = softmax_rows(probe_logits(std_model, zb));
    double loss = 0.0;
    for (std::size_t r = 0; r < b; ++r) {
      loss -= std::log(std::max(p(r, labels[lo + r]), 1e-300));
      p(r, labels[lo + r]) -= 1.0;
    }
    loss /= static_cast<double>(b);
    double w2 = 0.0;
    for (double w : std_model.weights.values()) w2 += w * w;
    loss += 0.5 * cfg.l2_penalty * w2;
    if (!update) return loss;
    const double inv_b = 1.0 / static_cast<double>(b);
    Matrix gw = matmul_at(p, zb);
    auto wv = std_model.weights.values();
    auto gv = gw.values();
    for (std::size_t i = 0; i < wv.size(); ++i) {
      wv[i] -= cfg.lr * (gv[i] * inv_b + cfg.l2_penalty * wv[i]);
    }
    for (std::size_t c = 0; c < n_classes; ++c) {
      double g = 0.0;
      for (std::size_t r = 0; r < b; ++r) g += p(r, c);
      std_model.bias[c] -= cfg.lr * g * inv_b;
    }
    return loss;
  };

  for (std::size_t it = 0; it < cfg.epochs; ++it) {
    for (std::size_t lo = 0; lo < n; lo += bs) {
      const double loss = objective_and_step(lo, std::min(n, lo + bs), true);
      if (loss_trace && bs == n) loss_trace->push_back(loss);
    }
  }
  if (loss_trace && bs == n) loss_trace->push_back(objective_and_step(0, n, false));

  ProbeModel out{Matrix(n_classes, k), std_model.bias};
  for (std::size_t c = 0; c < n_classes; ++c) {
    for (std::size_t j = 0; j < k; ++j) {
      out.weights(c, j) = std_model.weights(c, j) / scale[j];
      out.bias[c] -= out.weights(c, j) * mean[j];
    }
  }
  require_finite(out.weights, "probe weights");
  return out;
}

}  // namespace diet
