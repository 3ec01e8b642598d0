#pragma once

// Platform-independent pseudo-random numbers.
//
// Generator: xoshiro256** (Blackman & Vigna). State s[0..3] of 64-bit words,
//   result = rotl(s1 * 5, 7) * 9
//   t = s1 << 17
//   s2 ^= s0; s3 ^= s1; s1 ^= s2; s0 ^= s3; s2 ^= t; s3 = rotl(s3, 45)
// Seeding: the four words are successive outputs of SplitMix64 started at the
// seed, where SplitMix64 advances x += 0x9E3779B97F4A7C15 and outputs
//   z = x; z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9;
//   z = (z ^ (z >> 27)) * 0x94D049BB133111EB; z ^ (z >> 31).
// Derived streams hash a tuple of integers through the SplitMix64 finalizer,
// so stream (seed, epoch, index) never depends on how much any other stream
// consumed.
//
// Floating-point draws only use exact integer-to-double conversion, sqrt and
// log, never std:: distributions (whose algorithms are implementation
// defined).

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <string>

namespace diet {

inline constexpr std::uint64_t splitmix64_mix(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Order-sensitive hash of a tuple of 64-bit words.
inline constexpr std::uint64_t hash_words(
    std::initializer_list<std::uint64_t> words) noexcept {
  std::uint64_t h = 0x6A09E667F3BCC909ULL;
  for (std::uint64_t w : words) {
    h = splitmix64_mix(h + 0x9E3779B97F4A7C15ULL + w);
  }
  return h;
}

struct RngState {
  std::string algorithm = "xoshiro256**";
  std::uint64_t seed = 0;
  std::uint64_t position = 0;  // 64-bit words drawn since seeding
  std::array<std::uint64_t, 4> words{};
};

class Rng {
 public:
  static constexpr const char* kAlgorithm = "xoshiro256**";

  explicit Rng(std::uint64_t seed = 0) noexcept : seed_(seed) {
    std::uint64_t x = seed;
    for (auto& w : s_) {
      x += 0x9E3779B97F4A7C15ULL;
      w = splitmix64_mix(x);
    }
  }

  // Independent stream keyed by (seed, tags...).
  static Rng derive(std::uint64_t seed,
                    std::initializer_list<std::uint64_t> tags) noexcept {
    std::uint64_t h = seed;
    for (std::uint64_t t : tags) h = hash_words({h, t});
    return Rng(h);
  }

  std::uint64_t next_u64() noexcept {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    ++position_;
    return result;
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) noexcept {
    return lo + (hi - lo) * uniform();
  }

  // Uniform integer in [0, n). Rejection sampling, so unbiased.
  std::uint64_t below(std::uint64_t n) noexcept {
    if (n <= 1) return 0;
    const std::uint64_t limit = (~std::uint64_t{0}) - (~std::uint64_t{0}) % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  bool bernoulli(double p) noexcept { return uniform() < p; }

  // Standard normal by the Marsaglia polar method; the second variate of each
  // accepted pair is discarded so the state stays a pure function of draws.
  double normal() noexcept {
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    return u * std::sqrt(-2.0 * std::log(s) / s);
  }

  double normal(double mean, double stddev) noexcept {
    return mean + stddev * normal();
  }

  RngState state() const {
    return RngState{kAlgorithm, seed_, position_, s_};
  }

  static Rng from_state(const RngState& st) {
    Rng r(st.seed);
    r.s_ = st.words;
    r.position_ = st.position;
    return r;
  }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t position() const noexcept { return position_; }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t seed_;
  std::uint64_t position_ = 0;
  std::array<std::uint64_t, 4> s_{};
};

}  // namespace diet
