#pragma once

// Seeded deterministic randomness. The mt19937_64 output sequence is pinned
// by the standard; the distributions here are hand-rolled because the std
// distribution objects are implementation-defined and would break
// reproducibility guarantees across toolchains.

#include <cassert>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

namespace pbp {

/// Mixes a seed with a stream tag (splitmix64 finalizer) so nested searches
/// get independent, reproducible generators.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next() { return eng_(); }

  /// Unbiased integer in [0, n); rejection sampling, n >= 1.
  std::size_t index(std::size_t n) {
    assert(n >= 1);
    const std::uint64_t bound = n;
    // Reject the top partial interval so every residue is equally likely.
    const std::uint64_t rem =
        (std::numeric_limits<std::uint64_t>::max() % bound + 1) % bound;
    std::uint64_t x = next();
    while (x > std::numeric_limits<std::uint64_t>::max() - rem) x = next();
    return static_cast<std::size_t>(x % bound);
  }

  /// Uniform double in [0, 1).
  double real() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller; consumes two draws per value.
  double normal() {
    const double u1 = static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
    const double u2 = real();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  float normal_f() { return static_cast<float>(normal()); }

  /// Fisher-Yates shuffle driven by index().
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[index(i)]);
    }
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace pbp
