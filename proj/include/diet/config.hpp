#pragma once

// Training configuration and its flat "key = value" text form.
//
// Files must carry `schema_version = 1`. Lines starting with '#' are
// comments. Unknown keys are errors. Grid files hold several blocks separated
// by a line containing only `---`: the first block is shared by every run,
// each later block is one run's overrides.

#include <charconv>
#include <cstdio>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "diet/dataset.hpp"
#include "diet/error.hpp"
#include "diet/head.hpp"
#include "diet/optim.hpp"
#include "diet/probe.hpp"

namespace diet {

enum class TrainMode { diet, supervised };
enum class HeadVariant { full, sampled };

struct TrainConfig {
  static constexpr int kSchemaVersion = 1;

  TrainMode mode = TrainMode::diet;
  std::uint64_t seed = 0;

  SyntheticSpec data;
  std::size_t test_samples = 1000;
  std::size_t subsample = 0;  // 0: use the full training split

  std::vector<std::size_t> hidden{128, 128};
  std::size_t feature_dim = 64;

  double label_smoothing = 0.8;
  int augment_strength = 2;

  HeadVariant head = HeadVariant::full;
  std::size_t candidates = 64;
  double head_lr_scale = 1.0;
  bool decay_head = true;

  OptimConfig optim;
  // Stop after this many epochs while keeping the schedule of
  // optim.total_epochs (0: run to the end).
  std::size_t halt_epoch = 0;

  std::size_t probe_every = 0;  // online probe cadence in epochs, 0: final only
  ProbeConfig probe;
  std::size_t online_probe_epochs = 100;

  std::vector<std::size_t> layer_dims() const {
    std::vector<std::size_t> dims{data.feature_dim()};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(feature_dim);
    return dims;
  }

  std::size_t train_size() const { return subsample ? subsample : data.n_samples; }

  std::size_t last_epoch() const {
    return halt_epoch ? std::min(halt_epoch, optim.total_epochs) : optim.total_epochs;
  }

  void validate() const {
    data.validate();
    optim.validate();
    probe.validate();
    validate_layer_dims(layer_dims());
    validate_alpha(label_smoothing);
    if (augment_strength < 1 || augment_strength > 3) {
      throw ConfigError("augment.strength must be 1, 2 or 3");
    }
    if (subsample > data.n_samples) {
      throw ConfigError("data.subsample exceeds data.n_samples");
    }
    if (optim.batch_size > train_size()) {
      throw ConfigError("train.batch_size exceeds the training set size");
    }
    if (optim.total_epochs < 1) throw ConfigError("train.epochs must be >= 1");
    if (test_samples < data.n_classes) {
      throw ConfigError("data.test_samples must be >= data.n_classes");
    }
    if (head == HeadVariant::sampled && candidates < 1) {
      throw ConfigError("head.candidates must be >= 1");
    }
    if (!(head_lr_scale > 0.0)) throw ConfigError("head.lr_scale must be > 0");
  }

  bool operator==(const TrainConfig&) const = default;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::string fmt_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
    throw ConfigError("bad numeric value for " + key + ": '" + v + "'");
  }
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("bad boolean for " + key + ": '" + v + "'");
}

inline std::vector<std::size_t> parse_list(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_number<std::size_t>(key, item));
  }
  return out;
}

inline std::string join(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(v[i]);
  }
  return s;
}

}  // namespace detail

using KeyValues = std::vector<std::pair<std::string, std::string>>;

inline KeyValues parse_key_values(std::string_view text) {
  KeyValues out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    }
    out.emplace_back(detail::trim(t.substr(0, eq)), detail::trim(t.substr(eq + 1)));
  }
  return out;
}

inline void apply_setting(TrainConfig& c, const std::string& key, const std::string& v) {
  using detail::parse_number;
  if (key == "schema_version") {
    if (parse_number<int>(key, v) != TrainConfig::kSchemaVersion) {
      throw ConfigError("unsupported schema_version " + v);
    }
  } else if (key == "mode") {
    if (v == "diet") c.mode = TrainMode::diet;
    else if (v == "supervised") c.mode = TrainMode::supervised;
    else throw ConfigError("mode must be diet or supervised");
  } else if (key == "seed") {
    c.seed = parse_number<std::uint64_t>(key, v);
  } else if (key == "data.kind") {
    if (v == "gaussian-clusters") c.data.kind = SyntheticKind::gaussian_clusters;
    else if (v == "patterned-grids") c.data.kind = SyntheticKind::patterned_grids;
    else throw ConfigError("data.kind must be gaussian-clusters or patterned-grids");
  } else if (key == "data.n_samples") {
    c.data.n_samples = parse_number<std::size_t>(key, v);
  } else if (key == "data.dim") {
    c.data.dim = parse_number<std::size_t>(key, v);
  } else if (key == "data.n_classes") {
    c.data.n_classes = parse_number<std::size_t>(key, v);
  } else if (key == "data.noise_sigma") {
    c.data.noise_sigma = parse_number<double>(key, v);
  } else if (key == "data.seed") {
    c.data.seed = parse_number<std::uint64_t>(key, v);
  } else if (key == "data.test_samples") {
    c.test_samples = parse_number<std::size_t>(key, v);
  } else if (key == "data.subsample") {
    c.subsample = parse_number<std::size_t>(key, v);
  } else if (key == "encoder.hidden") {
    c.hidden = detail::parse_list(key, v);
  } else if (key == "encoder.feature_dim") {
    c.feature_dim = parse_number<std::size_t>(key, v);
  } else if (key == "loss.label_smoothing") {
    c.label_smoothing = parse_number<double>(key, v);
  } else if (key == "augment.strength") {
    c.augment_strength = parse_number<int>(key, v);
  } else if (key == "head.variant") {
    if (v == "full") c.head = HeadVariant::full;
    else if (v == "sampled") c.head = HeadVariant::sampled;
    else throw ConfigError("head.variant must be full or sampled");
  } else if (key == "head.candidates") {
    c.candidates = parse_number<std::size_t>(key, v);
  } else if (key == "head.lr_scale") {
    c.head_lr_scale = parse_number<double>(key, v);
  } else if (key == "head.weight_decay") {
    c.decay_head = detail::parse_bool(key, v);
  } else if (key == "optim.preset") {
    const auto p = OptimConfig::preset(v);
    c.optim.base_lr = p.base_lr;
    c.optim.weight_decay = p.weight_decay;
  } else if (key == "optim.kind") {
    if (v == "adamw") c.optim.kind = OptimKind::adamw;
    else if (v == "sgd") c.optim.kind = OptimKind::sgd;
    else throw ConfigError("optim.kind must be adamw or sgd");
  } else if (key == "optim.lr") {
    c.optim.base_lr = parse_number<double>(key, v);
  } else if (key == "optim.weight_decay") {
    c.optim.weight_decay = parse_number<double>(key, v);
  } else if (key == "optim.beta1") {
    c.optim.beta1 = parse_number<double>(key, v);
  } else if (key == "optim.beta2") {
    c.optim.beta2 = parse_number<double>(key, v);
  } else if (key == "optim.eps") {
    c.optim.eps = parse_number<double>(key, v);
  } else if (key == "optim.momentum") {
    c.optim.momentum = parse_number<double>(key, v);
  } else if (key == "optim.warmup_epochs") {
    c.optim.warmup_epochs = parse_number<std::size_t>(key, v);
  } else if (key == "optim.final_lr") {
    c.optim.final_lr = parse_number<double>(key, v);
  } else if (key == "train.epochs") {
    c.optim.total_epochs = parse_number<std::size_t>(key, v);
  } else if (key == "train.batch_size") {
    c.optim.batch_size = parse_number<std::size_t>(key, v);
  } else if (key == "train.halt_epoch") {
    c.halt_epoch = parse_number<std::size_t>(key, v);
  } else if (key == "probe.every") {
    c.probe_every = parse_number<std::size_t>(key, v);
  } else if (key == "probe.epochs") {
    c.probe.epochs = parse_number<std::size_t>(key, v);
  } else if (key == "probe.online_epochs") {
    c.online_probe_epochs = parse_number<std::size_t>(key, v);
  } else if (key == "probe.lr") {
    c.probe.lr = parse_number<double>(key, v);
  } else if (key == "probe.l2") {
    c.probe.l2_penalty = parse_number<double>(key, v);
  } else if (key == "probe.batch_size") {
    c.probe.batch_size = parse_number<std::size_t>(key, v);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

// Presets are applied before explicit keys regardless of line order.
inline void apply_settings(TrainConfig& c, const KeyValues& kvs) {
  for (const auto& [k, v] : kvs)
    if (k == "optim.preset") apply_setting(c, k, v);
  for (const auto& [k, v] : kvs)
    if (k != "optim.preset") apply_setting(c, k, v);
}

inline bool has_key(const KeyValues& kvs, std::string_view key) {
  for (const auto& kv : kvs)
    if (kv.first == key) return true;
  return false;
}

inline TrainConfig parse_config(std::string_view text, TrainConfig base = {}) {
  const auto kvs = parse_key_values(text);
  if (!has_key(kvs, "schema_version")) throw ConfigError("missing schema_version");
  apply_settings(base, kvs);
  base.validate();
  return base;
}

// Canonical text: every key, fixed order, shortest round-trip doubles.
inline std::string to_text(const TrainConfig& c) {
  using detail::fmt_double;
  std::ostringstream o;
  o << "schema_version = " << TrainConfig::kSchemaVersion << "\n"
    << "mode = " << (c.mode == TrainMode::diet ? "diet" : "supervised") << "\n"
    << "seed = " << c.seed << "\n"
    << "data.kind = " << to_string(c.data.kind) << "\n"
    << "data.n_samples = " << c.data.n_samples << "\n"
    << "data.dim = " << c.data.dim << "\n"
    << "data.n_classes = " << c.data.n_classes << "\n"
    << "data.noise_sigma = " << fmt_double(c.data.noise_sigma) << "\n"
    << "data.seed = " << c.data.seed << "\n"
    << "data.test_samples = " << c.test_samples << "\n"
    << "data.subsample = " << c.subsample << "\n"
    << "encoder.hidden = " << detail::join(c.hidden) << "\n"
    << "encoder.feature_dim = " << c.feature_dim << "\n"
    << "loss.label_smoothing = " << fmt_double(c.label_smoothing) << "\n"
    << "augment.strength = " << c.augment_strength << "\n"
    << "head.variant = " << (c.head == HeadVariant::full ? "full" : "sampled") << "\n"
    << "head.candidates = " << c.candidates << "\n"
    << "head.lr_scale = " << fmt_double(c.head_lr_scale) << "\n"
    << "head.weight_decay = " << (c.decay_head ? "true" : "false") << "\n"
    << "optim.kind = " << (c.optim.kind == OptimKind::adamw ? "adamw" : "sgd") << "\n"
    << "optim.lr = " << fmt_double(c.optim.base_lr) << "\n"
    << "optim.weight_decay = " << fmt_double(c.optim.weight_decay) << "\n"
    << "optim.beta1 = " << fmt_double(c.optim.beta1) << "\n"
    << "optim.beta2 = " << fmt_double(c.optim.beta2) << "\n"
    << "optim.eps = " << fmt_double(c.optim.eps) << "\n"
    << "optim.momentum = " << fmt_double(c.optim.momentum) << "\n"
    << "optim.warmup_epochs = " << c.optim.warmup_epochs << "\n"
    << "optim.final_lr = " << fmt_double(c.optim.final_lr) << "\n"
    << "train.epochs = " << c.optim.total_epochs << "\n"
    << "train.batch_size = " << c.optim.batch_size << "\n"
    << "train.halt_epoch = " << c.halt_epoch << "\n"
    << "probe.every = " << c.probe_every << "\n"
    << "probe.epochs = " << c.probe.epochs << "\n"
    << "probe.online_epochs = " << c.online_probe_epochs << "\n"
    << "probe.lr = " << fmt_double(c.probe.lr) << "\n"
    << "probe.l2 = " << fmt_double(c.probe.l2_penalty) << "\n"
    << "probe.batch_size = " << c.probe.batch_size << "\n";
  return o.str();
}

// FNV-1a of the canonical text, 16 hex digits. halt_epoch is excluded so a
// run halted early and its continuation share a hash.
inline std::string config_hash(const TrainConfig& c) {
  TrainConfig h = c;
  h.halt_epoch = 0;
  const std::string text = to_text(h);
  std::uint64_t x = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    x ^= ch;
    x *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline TrainConfig load_config(const std::string& path) {
  return parse_config(read_text_file(path));
}

inline std::vector<TrainConfig> parse_grid(std::string_view text) {
  std::vector<std::string> blocks(1);
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (detail::trim(line) == "---") {
      blocks.emplace_back();
    } else {
      blocks.back() += line + "\n";
    }
  }
  const auto base_kvs = parse_key_values(blocks.front());
  if (!has_key(base_kvs, "schema_version")) throw ConfigError("missing schema_version");
  TrainConfig base;
  apply_settings(base, base_kvs);
  std::vector<TrainConfig> grid;
  if (blocks.size() == 1) {
    base.validate();
    grid.push_back(base);
    return grid;
  }
  for (std::size_t i = 1; i < blocks.size(); ++i) {
    TrainConfig c = base;
    apply_settings(c, parse_key_values(blocks[i]));
    c.validate();
    grid.push_back(std::move(c));
  }
  return grid;
}

}  // namespace diet
