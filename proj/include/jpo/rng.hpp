#pragma once

#include <cmath>
#include <cstdint>

namespace jpo {

// Counter-mode SplitMix64. Output i of a stream is a pure function of
// (seed, stream, i), so replicate substreams can be evaluated in any order
// and from any thread with identical results.
class CounterRng {
 public:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  CounterRng(std::uint64_t seed, std::uint64_t stream)
      : key_(mix(seed + kGamma) ^ mix(stream * kGamma + 0x632BE59BD9B4E019ULL)) {}

  std::uint64_t at(std::uint64_t counter) const { return mix(key_ + (counter + 1) * kGamma); }

 private:
  std::uint64_t key_;
};

// Sequential view over one substream.
class Substream {
 public:
  Substream(std::uint64_t seed, std::uint64_t stream) : rng_(seed, stream) {}

  std::uint64_t next_u64() { return rng_.at(counter_++); }

  // Uniform on [0, 1), 53-bit resolution.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double next_uniform(double a, double b) { return a + (b - a) * next_unit(); }

  bool next_bernoulli(double p) { return next_unit() < p; }

  // Unbiased integer in [0, n) via multiply-with-rejection.
  std::uint64_t next_below(std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = next_u64();
      __uint128_t m = static_cast<__uint128_t>(r) * n;
      if (static_cast<std::uint64_t>(m) >= threshold) return static_cast<std::uint64_t>(m >> 64);
    }
  }

  // Box-Muller; consumes two uniforms per draw.
  double next_normal() {
    const double u1 = next_unit();
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log1p(-u1));
    return r * std::cos(2.0 * M_PI * u2);
  }

  // Rejection sampling from Normal(0,1) restricted to [lo, hi].
  double next_truncated_normal(double lo, double hi) {
    for (;;) {
      const double z = next_normal();
      if (z >= lo && z <= hi) return z;
    }
  }

 private:
  CounterRng rng_;
  std::uint64_t counter_ = 0;
};

}  // namespace jpo
