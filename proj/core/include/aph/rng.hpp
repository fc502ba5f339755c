#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace aph {

/// Seeded random source with hand-rolled sampling primitives.
///
/// std::mt19937_64's raw output sequence is pinned by the standard, but the
/// distributions on top of it are not. Every sampler here is written out
/// explicitly so that a given seed produces the same stream on every
/// platform and toolchain. All randomized behavior in the project goes
/// through this class.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform double in [0, 1) with 53 bits of entropy.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n) via rejection sampling (unbiased).
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
  }

  int below_int(int n) { return static_cast<int>(below(static_cast<std::uint64_t>(n))); }

  /// Fisher-Yates shuffle using this stream.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// Independent child stream; distinct tags give distinct streams.
  Rng fork(std::uint64_t tag) {
    return Rng(next_u64() ^ (tag * 0x9E3779B97F4A7C15ULL));
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace aph
