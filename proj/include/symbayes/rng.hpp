#ifndef SYMBAYES_RNG_HPP
#define SYMBAYES_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace symbayes {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; used as a counter-based mixer for stream derivation.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed for stream `index` under `master`. Distinct (master, tag, index) triples
// give statistically independent engines; no state is shared between them.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag, std::uint64_t index) {
  return splitmix64(splitmix64(splitmix64(master) ^ tag) + index);
}

inline Rng make_rng(std::uint64_t master, std::uint64_t tag = 0, std::uint64_t index = 0) {
  return Rng(derive_seed(master, tag, index));
}

inline double std_normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double gamma_draw(Rng& rng, double shape, double rate) {
  return std::gamma_distribution<double>(shape, 1.0 / rate)(rng);
}

inline double inverse_gamma_draw(Rng& rng, double shape, double rate) {
  return 1.0 / gamma_draw(rng, shape, rate);
}

inline double beta_draw(Rng& rng, double a, double b) {
  const double x = gamma_draw(rng, a, 1.0);
  const double y = gamma_draw(rng, b, 1.0);
  return x / (x + y);
}

}  // namespace symbayes

#endif  // SYMBAYES_RNG_HPP
