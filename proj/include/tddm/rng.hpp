#pragma once

#include <cstdint>

namespace tddm {

/// SplitMix64 (Steele, Lea & Flood 2014): 64-bit state advanced by the golden
/// gamma 0x9e3779b97f4a7c15, output mixed with the variant-13 finalizer.
///
/// Every random decision in the project draws from one of these streams, so a
/// seed fully determines a run on any platform. Integer and real mappings are
/// defined here rather than through <random> distributions, whose algorithms
/// are implementation-defined.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next() noexcept {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Independent child stream. Consumes one output of this stream and seeds
  /// the child with it after a second mix, so parent and child never share
  /// a state trajectory in practice.
  SplitMix64 split() noexcept {
    std::uint64_t seed = next();
    seed ^= 0x6a09e667f3bcc909ULL;
    return SplitMix64(SplitMix64(seed).next());
  }

  /// Uniform double in [0,1) using the top 53 bits.
  double uniform() noexcept {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Rejection sampling removes modulo bias.
  std::uint64_t below(std::uint64_t n) noexcept {
    if (n <= 1) return 0;
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = next();
      if (r >= threshold) return r % n;
    }
  }

  std::uint64_t state() const noexcept { return state_; }

 private:
  std::uint64_t state_;
};

}  // namespace tddm
