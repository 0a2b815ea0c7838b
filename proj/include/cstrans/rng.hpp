#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace cstrans {

// Deterministic stream splitting: mixes (seed, stream) through splitmix64 so
// parallel replicates get independent, platform-stable engines.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : eng_(splitmix64(splitmix64(seed) ^ splitmix64(~stream))) {}

  // Canonical double in [0, 1): 53 random bits. Avoids the library-defined
  // behavior of std::uniform_real_distribution so draws are reproducible.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  int bernoulli(double p) { return uniform() < p ? 1 : 0; }

  // Exp(1) by inversion; 1 - U keeps the argument strictly positive.
  double exponential() { return -std::log1p(-uniform()); }

  std::uint64_t integer() { return eng_(); }

  // Unbiased draw from {0, ..., bound-1} by rejection.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t r;
    do {
      r = eng_();
    } while (r >= limit);
    return r % bound;
  }

  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

// Standard normal via Box-Muller on canonical uniforms (deterministic across
// platforms, unlike std::normal_distribution).
inline double normal_draw(Rng& rng) {
  const double u1 = 1.0 - rng.uniform();
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
}

}  // namespace cstrans
