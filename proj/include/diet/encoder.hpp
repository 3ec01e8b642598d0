#pragma once

// Multilayer perceptron f: R^D -> R^K with ReLU on hidden layers and a
// linear output layer. Gradients are derived by hand; the caller's
// grad_features already carries any 1/B batch averaging from the loss.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "diet/error.hpp"
#include "diet/matrix.hpp"
#include "diet/rng.hpp"

namespace diet {

struct MlpEncoder {
  std::vector<std::size_t> layer_dims;          // [D, H1, ..., K]
  std::vector<Matrix> weights;                  // layer l: dims[l+1] x dims[l]
  std::vector<std::vector<double>> biases;      // layer l: dims[l+1]

  std::size_t layer_count() const noexcept { return weights.size(); }
  std::size_t input_dim() const noexcept { return layer_dims.front(); }
  std::size_t output_dim() const noexcept { return layer_dims.back(); }

  std::vector<std::span<double>> parameters() {
    std::vector<std::span<double>> out;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      out.push_back(weights[l].values());
      out.push_back(biases[l]);
    }
    return out;
  }

  std::uint64_t checksum() const {
    std::uint64_t h = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      h = hash_words({h, diet::checksum(weights[l].values()),
                      diet::checksum(biases[l])});
    }
    return h;
  }

  bool operator==(const MlpEncoder&) const = default;
};

struct ForwardCache {
  std::vector<Matrix> inputs;  // input to each layer
  std::vector<Matrix> masks;   // ReLU masks of the hidden layers
};

struct EncoderGrads {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;

  std::vector<std::span<const double>> views() const {
    std::vector<std::span<const double>> out;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      out.push_back(weights[l].values());
      out.push_back(biases[l]);
    }
    return out;
  }
};

inline void validate_layer_dims(std::span<const std::size_t> dims) {
  if (dims.size() < 2) throw SpecError("encoder needs at least [D, K]");
  for (auto d : dims) {
    if (d < 1) throw SpecError("encoder layer dims must be >= 1");
  }
}

// He initialisation: W ~ N(0, 2 / fan_in), b = 0.
inline MlpEncoder init_encoder(std::span<const std::size_t> layer_dims,
                               std::uint64_t seed) {
  validate_layer_dims(layer_dims);
  MlpEncoder enc;
  enc.layer_dims.assign(layer_dims.begin(), layer_dims.end());
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const std::size_t in = layer_dims[l], out = layer_dims[l + 1];
    Matrix w(out, in);
    Rng rng = Rng::derive(seed, {0xE1C, l});
    const double sd = std::sqrt(2.0 / static_cast<double>(in));
    for (double& v : w.values()) v = sd * rng.normal();
    enc.weights.push_back(std::move(w));
    enc.biases.emplace_back(out, 0.0);
  }
  return enc;
}

namespace detail {

inline Matrix affine(const Matrix& x, const Matrix& w, std::span<const double> b) {
  Matrix z = matmul_bt(x, w);
  for (std::size_t r = 0; r < z.rows(); ++r) {
    auto row = z.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += b[j];
  }
  return z;
}

}  // namespace detail

struct ForwardResult {
  Matrix features;
  ForwardCache cache;
};

inline ForwardResult forward(const MlpEncoder& enc, const Matrix& x) {
  if (x.cols() != enc.input_dim()) {
    throw DimensionError("encoder forward: input has " + std::to_string(x.cols()) +
                         " columns, expected " + std::to_string(enc.input_dim()));
  }
  ForwardResult res;
  Matrix h = x;
  const std::size_t last = enc.layer_count() - 1;
  for (std::size_t l = 0; l <= last; ++l) {
    Matrix z = detail::affine(h, enc.weights[l], enc.biases[l]);
    res.cache.inputs.push_back(std::move(h));
    if (l < last) {
      auto act = relu_forward(z);
      res.cache.masks.push_back(std::move(act.mask));
      h = std::move(act.out);
    } else {
      h = std::move(z);
    }
  }
  res.features = std::move(h);
  return res;
}

// Forward pass without keeping a cache.
inline Matrix encode(const MlpEncoder& enc, const Matrix& x) {
  if (x.cols() != enc.input_dim()) {
    throw DimensionError("encode: input width mismatch");
  }
  Matrix h = x;
  for (std::size_t l = 0; l < enc.layer_count(); ++l) {
    Matrix z = detail::affine(h, enc.weights[l], enc.biases[l]);
    h = (l + 1 < enc.layer_count()) ? relu_forward(z).out : std::move(z);
  }
  return h;
}

struct BackwardResult {
  EncoderGrads grads;
  Matrix grad_input;
};

inline BackwardResult backward(const MlpEncoder& enc, const ForwardCache& cache,
                               const Matrix& grad_features) {
  const std::size_t layers = enc.layer_count();
  if (cache.inputs.size() != layers || cache.masks.size() + 1 != layers) {
    throw DimensionError("encoder backward: cache does not match encoder depth");
  }
  const std::size_t batch = cache.inputs.front().rows();
  if (grad_features.rows() != batch || grad_features.cols() != enc.output_dim()) {
    throw DimensionError("encoder backward: grad_features is " +
                         shape_str(grad_features) + ", expected " +
                         std::to_string(batch) + "x" +
                         std::to_string(enc.output_dim()));
  }
  BackwardResult res;
  res.grads.weights.resize(layers);
  res.grads.biases.resize(layers);
  Matrix g = grad_features;
  for (std::size_t l = layers; l-- > 0;) {
    if (l + 1 < layers) g = relu_backward(g, cache.masks[l]);
    res.grads.weights[l] = matmul_at(g, cache.inputs[l]);
    std::vector<double> gb(g.cols(), 0.0);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      auto row = g.row(r);
      for (std::size_t j = 0; j < row.size(); ++j) gb[j] += row[j];
    }
    res.grads.biases[l] = std::move(gb);
    g = matmul(g, enc.weights[l]);
  }
  res.grad_input = std::move(g);
  return res;
}

}  // namespace diet
