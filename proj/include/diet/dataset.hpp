#pragma once

// Synthetic datasets where each sample's training target is its own row
// index. True class labels are carried for evaluation only; every read goes
// through an audited accessor so tests can prove the unsupervised training
// path never touches them.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "diet/binary_io.hpp"
#include "diet/error.hpp"
#include "diet/matrix.hpp"
#include "diet/rng.hpp"

namespace diet {

namespace label_audit {

inline std::atomic<std::uint64_t> training_reads{0};
inline std::atomic<std::uint64_t> probe_reads{0};
inline thread_local int probe_depth = 0;

// Label reads made while a ProbeScope is alive on the current thread are
// attributed to evaluation; everything else counts as a training read.
class ProbeScope {
 public:
  ProbeScope() noexcept { ++probe_depth; }
  ~ProbeScope() { --probe_depth; }
  ProbeScope(const ProbeScope&) = delete;
  ProbeScope& operator=(const ProbeScope&) = delete;
};

inline void record_read() noexcept {
  if (probe_depth > 0) {
    probe_reads.fetch_add(1, std::memory_order_relaxed);
  } else {
    training_reads.fetch_add(1, std::memory_order_relaxed);
  }
}

inline void reset() noexcept {
  training_reads = 0;
  probe_reads = 0;
}

}  // namespace label_audit

enum class SyntheticKind { gaussian_clusters, patterned_grids };

inline const char* to_string(SyntheticKind k) {
  return k == SyntheticKind::gaussian_clusters ? "gaussian-clusters"
                                               : "patterned-grids";
}

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::gaussian_clusters;
  std::size_t n_samples = 2000;
  // Feature dimension for gaussian-clusters, grid side for patterned-grids.
  std::size_t dim = 32;
  std::size_t n_classes = 10;
  double noise_sigma = 0.15;
  std::uint64_t seed = 0;
  // Independent sample draws from the same class structure: 0 = train,
  // anything else = a held-out split.
  std::uint64_t split = 0;

  std::size_t feature_dim() const {
    return kind == SyntheticKind::patterned_grids ? dim * dim : dim;
  }

  void validate() const {
    if (n_classes == 0) throw SpecError("n_classes must be >= 1");
    if (n_samples < n_classes) throw SpecError("n_samples must be >= n_classes");
    if (dim == 0) throw SpecError("dim must be >= 1");
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
      throw SpecError("noise_sigma must be finite and >= 0");
    }
  }

  bool operator==(const SyntheticSpec&) const = default;
};

// Features plus the row index as target; never the true label.
struct UnlabeledView {
  const Matrix* features = nullptr;
  std::optional<std::size_t> grid_side;

  std::size_t size() const { return features->rows(); }
  std::size_t dim() const { return features->cols(); }
};

class IndexedDataset {
 public:
  struct Sample {
    std::span<const double> x;
    std::size_t target;
  };

  IndexedDataset(std::string name, Matrix features,
                 std::vector<std::uint32_t> labels, std::size_t n_classes,
                 std::optional<std::size_t> grid_side = std::nullopt,
                 std::string provenance = {})
      : name_(std::move(name)),
        features_(std::move(features)),
        labels_(std::move(labels)),
        n_classes_(n_classes),
        grid_side_(grid_side),
        provenance_(std::move(provenance)) {
    if (labels_.size() != features_.rows()) {
      throw SpecError("label count " + std::to_string(labels_.size()) +
                      " != sample count " + std::to_string(features_.rows()));
    }
    for (auto l : labels_) {
      if (l >= n_classes_) throw SpecError("label out of range [0, C)");
    }
    if (grid_side_ && (*grid_side_) * (*grid_side_) != features_.cols()) {
      throw SpecError("grid_side^2 != feature dimension");
    }
    require_finite(features_, "dataset features");
  }

  std::size_t size() const noexcept { return features_.rows(); }
  std::size_t dim() const noexcept { return features_.cols(); }
  std::size_t n_classes() const noexcept { return n_classes_; }
  const std::string& name() const noexcept { return name_; }
  const std::string& provenance() const noexcept { return provenance_; }
  std::optional<std::size_t> grid_side() const noexcept { return grid_side_; }
  const Matrix& features() const noexcept { return features_; }

  // Index-as-target access: sample n comes back with target n.
  Sample operator[](std::size_t n) const { return {features_.row(n), n}; }

  UnlabeledView unlabeled() const noexcept { return {&features_, grid_side_}; }

  std::span<const std::uint32_t> true_labels() const noexcept {
    label_audit::record_read();
    return labels_;
  }

 private:
  std::string name_;
  Matrix features_;
  std::vector<std::uint32_t> labels_;
  std::size_t n_classes_;
  std::optional<std::size_t> grid_side_;
  std::string provenance_;
};

namespace detail {

enum : std::uint64_t { kTagCenters = 0xC3, kTagNoise = 0x401, kTagSubsample = 0x5B };

inline std::string describe(const SyntheticSpec& s) {
  return std::string(to_string(s.kind)) + " n=" + std::to_string(s.n_samples) +
         " dim=" + std::to_string(s.dim) + " C=" + std::to_string(s.n_classes) +
         " sigma=" + std::to_string(s.noise_sigma) +
         " seed=" + std::to_string(s.seed) + " split=" + std::to_string(s.split);
}

// Balanced round-robin class assignment.
inline std::vector<std::uint32_t> balanced_labels(std::size_t n, std::size_t c) {
  std::vector<std::uint32_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<std::uint32_t>(i % c);
  return labels;
}

inline Matrix add_noise(const Matrix& bases, std::span<const std::uint32_t> labels,
                        const SyntheticSpec& spec) {
  Matrix x(labels.size(), bases.cols());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    Rng rng = Rng::derive(spec.seed, {kTagNoise, spec.split, i});
    auto base = bases.row(labels[i]);
    auto row = x.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) {
      row[j] = base[j];
      if (spec.noise_sigma > 0.0) row[j] += spec.noise_sigma * rng.normal();
    }
  }
  return x;
}

}  // namespace detail

// Class centers uniform on the unit sphere (seed-dependent, split-independent)
// plus isotropic Gaussian noise.
inline IndexedDataset make_gaussian_clusters(const SyntheticSpec& spec) {
  spec.validate();
  if (spec.kind != SyntheticKind::gaussian_clusters) {
    throw SpecError("make_gaussian_clusters: wrong kind");
  }
  Matrix centers(spec.n_classes, spec.dim);
  Rng rng = Rng::derive(spec.seed, {detail::kTagCenters});
  for (std::size_t c = 0; c < spec.n_classes; ++c) {
    auto row = centers.row(c);
    double norm2 = 0.0;
    while (norm2 < 1e-24) {
      norm2 = 0.0;
      for (double& v : row) {
        v = rng.normal();
        norm2 += v * v;
      }
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& v : row) v *= inv;
  }
  auto labels = detail::balanced_labels(spec.n_samples, spec.n_classes);
  Matrix x = detail::add_noise(centers, labels, spec);
  return IndexedDataset("gaussian-clusters", std::move(x), std::move(labels),
                        spec.n_classes, std::nullopt, detail::describe(spec));
}

// Base image of class c on a g x g grid: bars (even c) or checkers (odd c)
// at orientation pi*frac(c*phi) and frequency 1 + c mod 3, values in [-1, 1].
inline std::vector<double> grid_pattern(std::size_t class_id, std::size_t g) {
  constexpr double kPhi = 0.6180339887498949;
  const double turn = class_id * kPhi - std::floor(class_id * kPhi);
  const double theta = std::numbers::pi * turn;
  const double freq = 1.0 + static_cast<double>(class_id % 3);
  const double w = 2.0 * std::numbers::pi * freq / static_cast<double>(g);
  const double ct = std::cos(theta), st = std::sin(theta);
  std::vector<double> img(g * g);
  for (std::size_t y = 0; y < g; ++y) {
    for (std::size_t x = 0; x < g; ++x) {
      const double u = static_cast<double>(x) * ct + static_cast<double>(y) * st;
      const double v = -static_cast<double>(x) * st + static_cast<double>(y) * ct;
      img[y * g + x] = (class_id % 2 == 0) ? std::cos(w * u + turn)
                                           : std::cos(w * u) * std::cos(w * v + turn);
    }
  }
  return img;
}

inline IndexedDataset make_patterned_grids(const SyntheticSpec& spec) {
  spec.validate();
  if (spec.kind != SyntheticKind::patterned_grids) {
    throw SpecError("make_patterned_grids: wrong kind");
  }
  const std::size_t g = spec.dim;
  Matrix bases(spec.n_classes, g * g);
  for (std::size_t c = 0; c < spec.n_classes; ++c) {
    auto img = grid_pattern(c, g);
    std::copy(img.begin(), img.end(), bases.row(c).begin());
  }
  auto labels = detail::balanced_labels(spec.n_samples, spec.n_classes);
  Matrix x = detail::add_noise(bases, labels, spec);
  return IndexedDataset("patterned-grids", std::move(x), std::move(labels),
                        spec.n_classes, g, detail::describe(spec));
}

inline IndexedDataset make_dataset(const SyntheticSpec& spec) {
  return spec.kind == SyntheticKind::gaussian_clusters ? make_gaussian_clusters(spec)
                                                       : make_patterned_grids(spec);
}

// m rows without replacement; kept rows stay in their original order, so
// m == N returns the dataset unchanged. Targets are renumbered 0..m-1
// implicitly by row position.
inline IndexedDataset subsample(const IndexedDataset& ds, std::size_t m,
                                std::uint64_t seed) {
  const std::size_t n = ds.size();
  if (m < 1 || m > n) {
    throw SpecError("subsample size " + std::to_string(m) + " outside [1, " +
                    std::to_string(n) + "]");
  }
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng = Rng::derive(seed, {detail::kTagSubsample});
  for (std::size_t i = 0; i < m; ++i) {
    std::swap(idx[i], idx[i + rng.below(n - i)]);
  }
  idx.resize(m);
  std::sort(idx.begin(), idx.end());

  // Carrying labels along is bookkeeping, not a training-path read.
  label_audit::ProbeScope carry;
  auto labels = ds.true_labels();
  Matrix x(m, ds.dim());
  std::vector<std::uint32_t> kept(m);
  for (std::size_t i = 0; i < m; ++i) {
    auto src = ds.features().row(idx[i]);
    std::copy(src.begin(), src.end(), x.row(i).begin());
    kept[i] = labels[idx[i]];
  }
  return IndexedDataset(ds.name() + "/sub" + std::to_string(m), std::move(x),
                        std::move(kept), ds.n_classes(), ds.grid_side(),
                        ds.provenance() + " subsample m=" + std::to_string(m) +
                            " seed=" + std::to_string(seed));
}

// Binary container: "DIETDS1" (7 bytes), u64 N, u64 D, u64 C, N*D f64
// features row-major, N u32 labels. All little-endian.
inline constexpr std::string_view kDatasetMagic = "DIETDS1";

inline void write_dataset(std::ostream& out, const IndexedDataset& ds) {
  label_audit::ProbeScope export_scope;
  io::put_magic(out, kDatasetMagic);
  io::put_u64(out, ds.size());
  io::put_u64(out, ds.dim());
  io::put_u64(out, ds.n_classes());
  io::put_f64s(out, ds.features().values());
  for (auto l : ds.true_labels()) io::put_u32(out, l);
}

inline IndexedDataset read_dataset(std::istream& in, std::string name = "file") {
  io::expect_magic(in, kDatasetMagic);
  constexpr std::uint64_t kMax = std::uint64_t{1} << 32;
  const auto n = io::get_count(in, kMax, "sample count");
  const auto d = io::get_count(in, kMax, "feature dimension");
  const auto c = io::get_count(in, kMax, "class count");
  if (n * d > (std::uint64_t{1} << 34)) throw FormatError("implausible dataset size");
  Matrix x(n, d);
  io::get_f64s(in, x.values(), "features");
  std::vector<std::uint32_t> labels(n);
  for (auto& l : labels) l = io::get_u32(in, "labels");
  try {
    return IndexedDataset(std::move(name), std::move(x), std::move(labels), c);
  } catch (const SpecError& e) {
    throw FormatError(std::string("invalid dataset payload: ") + e.what());
  }
}

inline void save_dataset(const std::string& path, const IndexedDataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  write_dataset(out, ds);
  if (!out) throw FormatError("write failed: " + path);
}

inline IndexedDataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  return read_dataset(in, path);
}

}  // namespace diet
