#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace scenediff {

/// Seeded generator with a fully specified output sequence.
///
/// Engine: 64-bit Mersenne Twister (std::mt19937_64, whose raw output is
/// fixed by the C++ standard) seeded with the 64-bit seed.
///   uniform()      = (next() >> 11) * 2^-53                in [0, 1)
///   normal()       = Box-Muller: u1 = 1 - uniform(), u2 = uniform(),
///                    r = sqrt(-2 ln u1); yields r cos(2 pi u2), then
///                    r sin(2 pi u2) on the following call
///   index(n)       = rejection sampling: draw x = next() until
///                    x >= (2^64 - n) mod n, return x mod n
class PortableRng {
 public:
  explicit PortableRng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  /// Uniform integer in [0, n); n must be positive.
  std::uint64_t index(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (true) {
      const std::uint64_t x = next();
      if (x >= threshold) return x % n;
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Derives an independent stream seed (SplitMix64 finalizer of seed + salt).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace scenediff
