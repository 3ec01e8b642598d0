#pragma once

// Checkpoint layout (all integers and floats little-endian):
//   "DIETCK1"                       7 bytes
//   u32 schema version              currently 1
//   config   : u64 length + canonical config text
//   progress : u64 epochs_done, u64 global_step
//   encoder  : u64 L+1, (L+1) x u64 layer dims, then per layer
//              out*in f64 weights (row-major), out f64 biases
//   head     : u64 N, u64 K, f64 alpha, N*K f64 (class-major rows)
//   optimizer: twice (encoder, head): u32 kind (0 adamw, 1 sgd), u64 step,
//              u64 tensors, per tensor u64 len, len f64 first moment /
//              velocity, and for adamw len f64 second moment
//   rng      : u64 length + algorithm id, u64 seed, u64 position
//   metrics  : u64 count, per record u64 epoch, f64 train_loss, f64 lr,
//              f64 probe_top1 (NaN when absent), f64 wall_seconds

#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include "diet/binary_io.hpp"
#include "diet/config.hpp"
#include "diet/error.hpp"
#include "diet/rng.hpp"
#include "diet/train.hpp"

namespace diet {

inline constexpr std::string_view kCheckpointMagic = "DIETCK1";
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_optim(std::ostream& out, const OptimState& st, OptimKind kind) {
  io::put_u32(out, kind == OptimKind::adamw ? 0u : 1u);
  io::put_u64(out, st.step);
  io::put_u64(out, st.first.size());
  for (std::size_t i = 0; i < st.first.size(); ++i) {
    io::put_u64(out, st.first[i].size());
    io::put_f64s(out, st.first[i]);
    if (kind == OptimKind::adamw) io::put_f64s(out, st.second[i]);
  }
}

inline OptimState get_optim(std::istream& in, OptimKind expected) {
  constexpr std::uint64_t kMaxLen = std::uint64_t{1} << 32;
  const std::uint32_t kind = io::get_u32(in, "optimizer kind");
  if (kind > 1 || (kind == 0) != (expected == OptimKind::adamw)) {
    throw FormatError("optimizer kind does not match the configuration");
  }
  OptimState st;
  st.step = io::get_u64(in, "optimizer step");
  const auto tensors = io::get_count(in, 1u << 16, "optimizer tensor count");
  for (std::uint64_t i = 0; i < tensors; ++i) {
    const auto len = io::get_count(in, kMaxLen, "optimizer tensor length");
    st.first.emplace_back(len);
    io::get_f64s(in, st.first.back(), "optimizer moments");
    if (kind == 0) {
      st.second.emplace_back(len);
      io::get_f64s(in, st.second.back(), "optimizer moments");
    }
  }
  return st;
}

}  // namespace detail

inline void write_checkpoint(std::ostream& out, const TrainingState& st) {
  const auto& cfg = st.config;
  io::put_magic(out, kCheckpointMagic);
  io::put_u32(out, kCheckpointVersion);
  io::put_string(out, to_text(cfg));

  io::put_u64(out, st.epochs_done);
  io::put_u64(out, st.global_step);

  io::put_u64(out, st.encoder.layer_dims.size());
  for (auto d : st.encoder.layer_dims) io::put_u64(out, d);
  for (std::size_t l = 0; l < st.encoder.layer_count(); ++l) {
    io::put_f64s(out, st.encoder.weights[l].values());
    io::put_f64s(out, st.encoder.biases[l]);
  }

  io::put_u64(out, st.head.n_classes());
  io::put_u64(out, st.head.feature_dim());
  io::put_f64(out, st.head.alpha);
  io::put_f64s(out, st.head.weight.values());

  detail::put_optim(out, st.encoder_opt, cfg.optim.kind);
  detail::put_optim(out, st.head_opt, cfg.optim.kind);

  // Every random stream is derived from (seed, epoch/step, index), so the
  // seed and the step position pin all of them.
  io::put_string(out, Rng::kAlgorithm);
  io::put_u64(out, cfg.seed);
  io::put_u64(out, st.global_step);

  io::put_u64(out, st.metrics.size());
  for (const auto& m : st.metrics) {
    io::put_u64(out, m.epoch);
    io::put_f64(out, m.train_loss);
    io::put_f64(out, m.lr);
    io::put_f64(out, m.probe_top1 ? *m.probe_top1
                                  : std::numeric_limits<double>::quiet_NaN());
    io::put_f64(out, m.wall_seconds);
  }
}

inline TrainingState read_checkpoint(std::istream& in) {
  io::expect_magic(in, kCheckpointMagic);
  const std::uint32_t version = io::get_u32(in, "schema version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  TrainingState st;
  try {
    st.config = parse_config(io::get_string(in, 1u << 20, "config"));
  } catch (const ConfigError& e) {
    throw FormatError(std::string("embedded config: ") + e.what());
  }
  st.epochs_done = io::get_u64(in, "epochs_done");
  st.global_step = io::get_u64(in, "global_step");

  constexpr std::uint64_t kMaxDim = std::uint64_t{1} << 24;
  const auto n_dims = io::get_count(in, 1024, "encoder depth");
  if (n_dims < 2) throw FormatError("encoder needs at least two layer dims");
  for (std::uint64_t i = 0; i < n_dims; ++i) {
    st.encoder.layer_dims.push_back(io::get_count(in, kMaxDim, "layer dim"));
  }
  if (st.encoder.layer_dims != st.config.layer_dims()) {
    throw FormatError("encoder dims disagree with the embedded config");
  }
  for (std::size_t l = 0; l + 1 < st.encoder.layer_dims.size(); ++l) {
    Matrix w(st.encoder.layer_dims[l + 1], st.encoder.layer_dims[l]);
    io::get_f64s(in, w.values(), "encoder weights");
    std::vector<double> b(st.encoder.layer_dims[l + 1]);
    io::get_f64s(in, b, "encoder biases");
    st.encoder.weights.push_back(std::move(w));
    st.encoder.biases.push_back(std::move(b));
  }

  const auto n = io::get_count(in, kMaxDim, "head classes");
  const auto k = io::get_count(in, kMaxDim, "head feature dim");
  st.head.alpha = io::get_f64(in, "alpha");
  st.head.weight = Matrix(n, k);
  io::get_f64s(in, st.head.weight.values(), "head weights");

  st.encoder_opt = detail::get_optim(in, st.config.optim.kind);
  st.head_opt = detail::get_optim(in, st.config.optim.kind);

  const std::string algo = io::get_string(in, 64, "rng algorithm");
  if (algo != Rng::kAlgorithm) throw FormatError("unknown rng algorithm " + algo);
  if (io::get_u64(in, "rng seed") != st.config.seed) {
    throw FormatError("rng seed disagrees with the embedded config");
  }
  if (io::get_u64(in, "rng position") != st.global_step) {
    throw FormatError("rng position disagrees with the step counter");
  }

  const auto count = io::get_count(in, 1u << 24, "metrics count");
  const std::string hash = config_hash(st.config);
  for (std::uint64_t i = 0; i < count; ++i) {
    MetricsRecord m;
    m.epoch = io::get_u64(in, "metrics");
    m.train_loss = io::get_f64(in, "metrics");
    m.lr = io::get_f64(in, "metrics");
    const double probe = io::get_f64(in, "metrics");
    if (!std::isnan(probe)) m.probe_top1 = probe;
    m.wall_seconds = io::get_f64(in, "metrics");
    m.config_hash = hash;
    st.metrics.push_back(std::move(m));
  }
  return st;
}

inline void save_checkpoint(const std::string& path, const TrainingState& st) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  write_checkpoint(out, st);
  if (!out) throw FormatError("write failed: " + path);
}

inline TrainingState load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  return read_checkpoint(in);
}

}  // namespace diet
