#pragma once

// Training loop: augment -> encode -> head -> smoothed X-Ent -> backprop ->
// optimizer step under the warmup/cosine schedule. In diet mode the targets
// are row indices; true labels are read only inside the probe. Supervised
// mode swaps in a C-way head trained on the true labels.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "diet/augment.hpp"
#include "diet/batching.hpp"
#include "diet/config.hpp"
#include "diet/dataset.hpp"
#include "diet/encoder.hpp"
#include "diet/error.hpp"
#include "diet/head.hpp"
#include "diet/metrics.hpp"
#include "diet/optim.hpp"
#include "diet/probe.hpp"

namespace diet {

// Everything needed to continue a run exactly where it stopped.
struct TrainingState {
  TrainConfig config;
  MlpEncoder encoder;
  DietHead head;
  OptimState encoder_opt;
  OptimState head_opt;
  std::size_t epochs_done = 0;
  std::uint64_t global_step = 0;
  std::vector<MetricsRecord> metrics;
};

struct RunArtifact {
  TrainConfig config;
  std::vector<MetricsRecord> metrics;
  MlpEncoder encoder;
  DietHead head;
  std::string checkpoint_path;  // empty when the run was not saved

  double final_train_loss() const { return metrics.back().train_loss; }
  std::optional<double> final_probe() const { return metrics.back().probe_top1; }
};

// Training split (possibly subsampled), the full training split the probe is
// fit on, and a held-out split drawn from the same class structure.
struct RunData {
  IndexedDataset train;
  IndexedDataset probe_train;
  IndexedDataset test;
};

namespace seeds {
inline std::uint64_t encoder(const TrainConfig& c) { return hash_words({c.seed, 0xE4C}); }
inline std::uint64_t head(const TrainConfig& c) { return hash_words({c.seed, 0x4EAD}); }
inline std::uint64_t batches(const TrainConfig& c) { return hash_words({c.seed, 0xBA7C}); }
inline std::uint64_t subsample(const TrainConfig& c) { return hash_words({c.seed, 0x5B5}); }
inline std::uint64_t candidates(const TrainConfig& c) { return hash_words({c.seed, 0xCA4D}); }
}  // namespace seeds

inline RunData make_run_data(const TrainConfig& cfg) {
  SyntheticSpec train_spec = cfg.data;
  train_spec.split = 0;
  IndexedDataset full = make_dataset(train_spec);
  SyntheticSpec test_spec = cfg.data;
  test_spec.split = 1;
  test_spec.n_samples = cfg.test_samples;
  IndexedDataset test = make_dataset(test_spec);
  if (cfg.subsample && cfg.subsample < full.size()) {
    IndexedDataset sub = subsample(full, cfg.subsample, seeds::subsample(cfg));
    return {std::move(sub), std::move(full), std::move(test)};
  }
  IndexedDataset train = full;
  return {std::move(train), std::move(full), std::move(test)};
}

inline std::vector<double> column_std(const Matrix& x) {
  std::vector<double> mean(x.cols(), 0.0), var(x.cols(), 0.0);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t j = 0; j < x.cols(); ++j) mean[j] += x(r, j);
  for (double& m : mean) m /= static_cast<double>(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t j = 0; j < x.cols(); ++j)
      var[j] += (x(r, j) - mean[j]) * (x(r, j) - mean[j]);
  for (double& v : var) v = std::sqrt(v / static_cast<double>(x.rows()));
  return var;
}

// Fits a probe on clean features of the probe-training split and scores the
// held-out split. The only place a diet-mode run reads labels.
inline double evaluate_probe(const MlpEncoder& enc, const RunData& data,
                             const ProbeConfig& pc) {
  label_audit::ProbeScope scope;
  const Matrix train_f = extract_features(enc, data.probe_train);
  const Matrix test_f = extract_features(enc, data.test);
  const ProbeModel model = fit_probe(train_f, data.probe_train.true_labels(), pc,
                                     data.probe_train.n_classes());
  return top1_accuracy(model, test_f, data.test.true_labels());
}

inline TrainingState initial_state(const TrainConfig& cfg) {
  cfg.validate();
  TrainingState st;
  st.config = cfg;
  const auto dims = cfg.layer_dims();
  st.encoder = init_encoder(dims, seeds::encoder(cfg));
  const std::size_t n_out =
      cfg.mode == TrainMode::diet ? cfg.train_size() : cfg.data.n_classes;
  st.head = init_head(n_out, cfg.feature_dim, seeds::head(cfg), cfg.label_smoothing);
  return st;
}

class Trainer {
 public:
  explicit Trainer(const TrainConfig& cfg) : Trainer(initial_state(cfg)) {}

  // Continue from a saved state. `halt_epoch` replaces the stored one
  // (0: run to the end of the schedule).
  explicit Trainer(TrainingState state, std::optional<std::size_t> halt_epoch = {})
      : state_(std::move(state)),
        data_(make_run_data(state_.config)),
        hash_(config_hash(state_.config)),
        start_(std::chrono::steady_clock::now()) {
    if (halt_epoch) state_.config.halt_epoch = *halt_epoch;
    state_.config.validate();
    const auto& cfg = state_.config;
    const std::size_t expected_classes =
        cfg.mode == TrainMode::diet ? data_.train.size() : cfg.data.n_classes;
    if (state_.head.n_classes() != expected_classes ||
        state_.encoder.layer_dims != cfg.layer_dims()) {
      throw ConfigError("model shapes do not match the configuration");
    }
    policy_ = AugmentationPolicy::tier(cfg.augment_strength,
                                       data_.train.grid_side() ? AugmentLayout::grid
                                                               : AugmentLayout::vector);
    if (!data_.train.grid_side()) policy_.feature_std = column_std(data_.train.features());
    if (!state_.metrics.empty()) wall_offset_ = state_.metrics.back().wall_seconds;
  }

  bool finished() const { return state_.epochs_done >= state_.config.last_epoch(); }
  const TrainingState& state() const { return state_; }
  const RunData& data() const { return data_; }

  std::size_t steps_per_epoch() const {
    const std::size_t n = data_.train.size();
    const std::size_t bs = state_.config.optim.batch_size;
    return (n + bs - 1) / bs;
  }

  const MetricsRecord& run_epoch() {
    const TrainConfig& cfg = state_.config;
    const std::size_t epoch = state_.epochs_done;
    EpochPlan plan(data_.train.unlabeled(), cfg.optim.batch_size, epoch,
                   seeds::batches(cfg), policy_);
    const std::size_t spe = plan.batch_count();

    std::span<const std::uint32_t> labels;
    if (cfg.mode == TrainMode::supervised) labels = data_.train.true_labels();

    OptimConfig head_cfg = cfg.optim;
    if (!cfg.decay_head) head_cfg.weight_decay = 0.0;

    double loss_sum = 0.0;
    double lr = 0.0;
    for (std::size_t b = 0; b < spe; ++b) {
      const std::uint64_t step = state_.global_step;
      lr = lr_at(cfg.optim, step, spe);
      Batch batch = plan.batch(b);
      std::vector<std::size_t> targets = batch.targets;
      if (cfg.mode == TrainMode::supervised) {
        for (auto& t : targets) t = labels[t];
      }
      try {
        loss_sum += train_step(batch.x, targets, lr, head_cfg) *
                    static_cast<double>(targets.size());
      } catch (const NumericError& e) {
        throw DivergenceError(step, e.what());
      }
      ++state_.global_step;
    }

    ++state_.epochs_done;
    MetricsRecord rec;
    rec.epoch = state_.epochs_done;
    rec.train_loss = loss_sum / static_cast<double>(data_.train.size());
    rec.lr = lr;
    rec.config_hash = hash_;
    const bool last = state_.epochs_done == cfg.last_epoch();
    const bool online = cfg.probe_every && state_.epochs_done % cfg.probe_every == 0;
    if (last || online) {
      ProbeConfig pc = cfg.probe;
      if (!last) pc.epochs = cfg.online_probe_epochs;
      rec.probe_top1 = evaluate_probe(state_.encoder, data_, pc);
    }
    rec.wall_seconds =
        wall_offset_ +
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    state_.metrics.push_back(std::move(rec));
    return state_.metrics.back();
  }

  RunArtifact run() {
    while (!finished()) run_epoch();
    return artifact();
  }

  RunArtifact artifact() const {
    return {state_.config, state_.metrics, state_.encoder, state_.head, {}};
  }

 private:
  // One optimizer step; returns the batch-mean loss.
  double train_step(const Matrix& x, std::span<const std::size_t> targets, double lr,
                    const OptimConfig& head_cfg) {
    const TrainConfig& cfg = state_.config;
    ForwardResult fw = forward(state_.encoder, x);
    double loss = 0.0;
    HeadGrads hg;
    std::vector<std::size_t> candidates;
    if (cfg.head == HeadVariant::full || cfg.mode == TrainMode::supervised) {
      Matrix z = logits(state_.head, fw.features);
      XentResult xr = xent_smoothed(z, targets, cfg.label_smoothing);
      loss = xr.loss;
      hg = head_backward(state_.head, fw.features, xr.grad_logits);
    } else {
      Rng rng = Rng::derive(seeds::candidates(cfg), {state_.global_step});
      SampledXent sx = sampled_xent(state_.head, fw.features, targets,
                                    cfg.label_smoothing,
                                    uniform_negatives(cfg.candidates), rng);
      loss = sx.loss;
      hg = sampled_head_backward(state_.head, fw.features, sx);
      candidates = std::move(sx.candidates);
    }
    if (!std::isfinite(loss)) throw NumericError("non-finite loss");

    BackwardResult bw = backward(state_.encoder, fw.cache, hg.grad_features);
    auto params = state_.encoder.parameters();
    auto grads = bw.grads.views();
    optimizer_step(params, grads, state_.encoder_opt, lr, cfg.optim);

    const double head_lr = lr * cfg.head_lr_scale;
    if (candidates.empty()) {
      std::span<double> w = state_.head.weight.values();
      std::span<const double> gw = hg.grad_weight.values();
      optimizer_step(std::span<const std::span<double>>(&w, 1),
                     std::span<const std::span<const double>>(&gw, 1),
                     state_.head_opt, head_lr, head_cfg);
    } else {
      optimizer_step_rows(state_.head.weight, hg.grad_weight, candidates,
                          state_.head_opt, head_lr, head_cfg);
    }
    require_finite(state_.head.weight, "head weights");
    for (const auto& w : state_.encoder.weights) require_finite(w, "encoder weights");
    return loss;
  }

  TrainingState state_;
  RunData data_;
  AugmentationPolicy policy_;
  std::string hash_;
  std::chrono::steady_clock::time_point start_;
  double wall_offset_ = 0.0;
};

inline RunArtifact run_training(const TrainConfig& cfg) { return Trainer(cfg).run(); }

inline RunArtifact run_diet(const TrainConfig& cfg) {
  if (cfg.mode != TrainMode::diet) throw ConfigError("run_diet needs mode = diet");
  return run_training(cfg);
}

inline RunArtifact run_supervised(const TrainConfig& cfg) {
  if (cfg.mode != TrainMode::supervised) {
    throw ConfigError("run_supervised needs mode = supervised");
  }
  return run_training(cfg);
}

}  // namespace diet
