#pragma once

// Three nested augmentation tiers. Grid layout (images flattened row-major):
//   1: random crop (area scale U[0.6, 1]) resized back by nearest neighbour,
//      horizontal flip p=0.5
//   2: + brightness/contrast jitter p=0.3 (gain U[0.6, 1.4], offset
//      U[-0.2, 0.2]), mean blend ("grayscale") p=0.2
//   3: + 3x3 box blur p=0.2, random erasing p=0.25 (10-25% of the area)
// Vector layout:
//   1: additive noise N(0, (0.1 * feature_std)^2), sign flip of a random
//      coordinate pair p=0.5
//   2: + scaling jitter p=0.3 (gain U[0.6, 1.4])
//   3: + erasing of a contiguous coordinate range p=0.25 (10-25% of D)
// Transforms run in the order listed. Every transform draws its Bernoulli
// trial whether or not it fires, and later tiers only consume randomness
// after earlier ones, so disabling tiers 2/3 reproduces tier-1 output.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "diet/error.hpp"
#include "diet/rng.hpp"

namespace diet {

enum class AugmentLayout { grid, vector };

namespace transform {
enum Bit : std::uint32_t {
  crop = 1u << 0,
  flip = 1u << 1,
  jitter = 1u << 2,
  gray = 1u << 3,
  blur = 1u << 4,
  erase = 1u << 5,
  noise = 1u << 6,
  sign_flip = 1u << 7,
};
}  // namespace transform

struct AugmentationPolicy {
  int strength = 2;
  AugmentLayout layout = AugmentLayout::grid;

  double crop_p = 1.0;
  double crop_scale_min = 0.6;
  double crop_scale_max = 1.0;
  double flip_p = 0.5;

  double jitter_p = 0.3;
  double gain_min = 0.6;
  double gain_max = 1.4;
  double offset_max = 0.2;
  double gray_p = 0.2;
  double gray_blend = 0.5;

  double blur_p = 0.2;
  double erase_p = 0.25;
  double erase_area_min = 0.10;
  double erase_area_max = 0.25;

  double noise_p = 1.0;
  double noise_scale = 0.1;
  std::vector<double> feature_std;  // empty: unit scale per coordinate

  static AugmentationPolicy tier(int strength, AugmentLayout layout) {
    AugmentationPolicy p;
    p.strength = strength;
    p.layout = layout;
    p.validate();
    return p;
  }

  // Test hook: every probabilistic transform off.
  AugmentationPolicy& disable_all() {
    crop_p = flip_p = jitter_p = gray_p = blur_p = erase_p = noise_p = 0.0;
    return *this;
  }

  void validate() const {
    if (strength < 1 || strength > 3) {
      throw PolicyError("augmentation strength must be 1, 2 or 3");
    }
    for (double p : {crop_p, flip_p, jitter_p, gray_p, blur_p, erase_p, noise_p}) {
      if (!(p >= 0.0 && p <= 1.0)) throw PolicyError("probability outside [0, 1]");
    }
    if (!(crop_scale_min > 0.0 && crop_scale_min <= crop_scale_max &&
          crop_scale_max <= 1.0)) {
      throw PolicyError("crop scale range must satisfy 0 < min <= max <= 1");
    }
    if (!(erase_area_min > 0.0 && erase_area_min <= erase_area_max &&
          erase_area_max <= 1.0)) {
      throw PolicyError("erase area range must satisfy 0 < min <= max <= 1");
    }
  }
};

namespace detail {

inline void crop_resize(std::vector<double>& x, std::size_t g, double scale,
                        Rng& rng) {
  const auto side = static_cast<std::size_t>(std::clamp<double>(
      std::round(static_cast<double>(g) * std::sqrt(scale)), 1.0,
      static_cast<double>(g)));
  const std::size_t top = rng.below(g - side + 1);
  const std::size_t left = rng.below(g - side + 1);
  std::vector<double> out(g * g);
  for (std::size_t y = 0; y < g; ++y) {
    const std::size_t sy = top + (y * side) / g;
    for (std::size_t xx = 0; xx < g; ++xx) {
      out[y * g + xx] = x[sy * g + left + (xx * side) / g];
    }
  }
  x.swap(out);
}

inline void hflip(std::vector<double>& x, std::size_t g) {
  for (std::size_t y = 0; y < g; ++y) {
    std::reverse(x.begin() + static_cast<std::ptrdiff_t>(y * g),
                 x.begin() + static_cast<std::ptrdiff_t>((y + 1) * g));
  }
}

inline void box_blur3(std::vector<double>& x, std::size_t g) {
  std::vector<double> out(g * g);
  for (std::size_t y = 0; y < g; ++y) {
    for (std::size_t xx = 0; xx < g; ++xx) {
      double s = 0.0;
      int cnt = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const auto yy = static_cast<std::ptrdiff_t>(y) + dy;
          const auto xq = static_cast<std::ptrdiff_t>(xx) + dx;
          if (yy < 0 || xq < 0 || yy >= static_cast<std::ptrdiff_t>(g) ||
              xq >= static_cast<std::ptrdiff_t>(g)) {
            continue;
          }
          s += x[static_cast<std::size_t>(yy) * g + static_cast<std::size_t>(xq)];
          ++cnt;
        }
      }
      out[y * g + xx] = s / cnt;
    }
  }
  x.swap(out);
}

inline void erase_rect(std::vector<double>& x, std::size_t g,
                       const AugmentationPolicy& p, Rng& rng) {
  const double area = rng.uniform(p.erase_area_min, p.erase_area_max) *
                      static_cast<double>(g * g);
  const double aspect = std::exp(rng.uniform(std::log(0.5), std::log(2.0)));
  const auto clamp_side = [g](double v) {
    return static_cast<std::size_t>(
        std::clamp<double>(std::round(v), 1.0, static_cast<double>(g)));
  };
  const std::size_t h = clamp_side(std::sqrt(area * aspect));
  const std::size_t w = clamp_side(std::sqrt(area / aspect));
  const std::size_t top = rng.below(g - h + 1);
  const std::size_t left = rng.below(g - w + 1);
  for (std::size_t y = top; y < top + h; ++y)
    for (std::size_t xx = left; xx < left + w; ++xx) x[y * g + xx] = 0.0;
}

inline double mean_of(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return x.empty() ? 0.0 : s / static_cast<double>(x.size());
}

inline void augment_grid(std::vector<double>& x, std::size_t g,
                         const AugmentationPolicy& p, Rng& rng,
                         std::uint32_t& fired) {
  if (rng.bernoulli(p.crop_p)) {
    crop_resize(x, g, rng.uniform(p.crop_scale_min, p.crop_scale_max), rng);
    fired |= transform::crop;
  }
  if (rng.bernoulli(p.flip_p)) {
    hflip(x, g);
    fired |= transform::flip;
  }
  if (p.strength >= 2) {
    if (rng.bernoulli(p.jitter_p)) {
      const double gain = rng.uniform(p.gain_min, p.gain_max);
      const double offset = rng.uniform(-p.offset_max, p.offset_max);
      for (double& v : x) v = gain * v + offset;
      fired |= transform::jitter;
    }
    if (rng.bernoulli(p.gray_p)) {
      const double m = mean_of(x);
      for (double& v : x) v = (1.0 - p.gray_blend) * v + p.gray_blend * m;
      fired |= transform::gray;
    }
  }
  if (p.strength >= 3) {
    if (rng.bernoulli(p.blur_p)) {
      box_blur3(x, g);
      fired |= transform::blur;
    }
    if (rng.bernoulli(p.erase_p)) {
      erase_rect(x, g, p, rng);
      fired |= transform::erase;
    }
  }
}

inline void augment_vector(std::vector<double>& x, const AugmentationPolicy& p,
                           Rng& rng, std::uint32_t& fired) {
  const std::size_t d = x.size();
  if (rng.bernoulli(p.noise_p)) {
    for (std::size_t j = 0; j < d; ++j) {
      const double sd = p.feature_std.empty() ? 1.0 : p.feature_std[j];
      x[j] += p.noise_scale * sd * rng.normal();
    }
    fired |= transform::noise;
  }
  if (rng.bernoulli(p.flip_p)) {
    const std::size_t i = rng.below(d);
    std::size_t j = d > 1 ? rng.below(d - 1) : i;
    if (d > 1 && j >= i) ++j;
    x[i] = -x[i];
    if (j != i) x[j] = -x[j];
    fired |= transform::sign_flip;
  }
  if (p.strength >= 2 && rng.bernoulli(p.jitter_p)) {
    const double gain = rng.uniform(p.gain_min, p.gain_max);
    for (double& v : x) v *= gain;
    fired |= transform::jitter;
  }
  if (p.strength >= 3 && rng.bernoulli(p.erase_p)) {
    const double frac = rng.uniform(p.erase_area_min, p.erase_area_max);
    const auto len = static_cast<std::size_t>(std::clamp<double>(
        std::round(frac * static_cast<double>(d)), 1.0, static_cast<double>(d)));
    const std::size_t start = rng.below(d - len + 1);
    std::fill(x.begin() + static_cast<std::ptrdiff_t>(start),
              x.begin() + static_cast<std::ptrdiff_t>(start + len), 0.0);
    fired |= transform::erase;
  }
}

}  // namespace detail

// Returns the augmented copy of `x`. If `fired` is given it receives the
// transform::Bit mask of transforms that were applied.
inline std::vector<double> augment(std::span<const double> x,
                                   const AugmentationPolicy& policy,
                                   std::optional<std::size_t> grid_side, Rng& rng,
                                   std::uint32_t* fired = nullptr) {
  policy.validate();
  std::vector<double> out(x.begin(), x.end());
  std::uint32_t mask = 0;
  if (policy.layout == AugmentLayout::grid) {
    if (!grid_side) throw PolicyError("grid transforms need a grid side");
    if ((*grid_side) * (*grid_side) != x.size()) {
      throw PolicyError("grid_side^2 != sample length");
    }
    detail::augment_grid(out, *grid_side, policy, rng, mask);
  } else {
    if (!policy.feature_std.empty() && policy.feature_std.size() != x.size()) {
      throw PolicyError("feature_std length != sample length");
    }
    if (!x.empty()) detail::augment_vector(out, policy, rng, mask);
  }
  if (fired) *fired = mask;
  return out;
}

}  // namespace diet
