#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace adares {

// Deterministic random stream. All draws are derived from the raw mt19937_64
// output so sequences are reproducible across platforms and standard library
// versions (std::*_distribution is implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Rejection sampling keeps the result unbiased.
  int uniform_int(int n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % static_cast<std::uint64_t>(n));
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return static_cast<int>(x % static_cast<std::uint64_t>(n));
  }

  // Standard normal via Box-Muller; consumes exactly two uniforms per call.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // Independent child stream; `stream` distinguishes siblings forked from the
  // same parent (e.g. one stream per video).
  Rng fork(std::uint64_t stream) const {
    return Rng(mix(state_hash() ^ mix(stream + 0x9e3779b97f4a7c15ULL)));
  }

 private:
  std::uint64_t state_hash() const {
    // Hash the seed-dependent identity of this stream without perturbing it.
    std::mt19937_64 copy = engine_;
    return copy();
  }

  static std::uint64_t mix(std::uint64_t x) {
    // splitmix64 finalizer
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  std::mt19937_64 engine_;
};

}  // namespace adares
