#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace heraldsim {

/// SplitMix64 finalizer: a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// SplitMix64 engine (https://prng.di.unimi.it).
///
/// Satisfies UniformRandomBitGenerator. Streams are keyed by a
/// (seed, block, lane) triple through keyed(), so any partition of the work
/// into blocks reproduces the same draws.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit constexpr SplitMix64(std::uint64_t seed) : state_(seed) {}

  /// Independent stream for one work block and one purpose ("lane").
  static constexpr SplitMix64 keyed(std::uint64_t seed, std::uint64_t block,
                                    std::uint64_t lane) {
    std::uint64_t k = mix64(seed ^ 0x6a09e667f3bcc909ull);
    k = mix64(k ^ (block * 0x9e3779b97f4a7c15ull));
    k = mix64(k ^ (lane * 0xc2b2ae3d27d4eb4full));
    return SplitMix64(k);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() {
    state_ += 0x9e3779b97f4a7c15ull;
    return mix64(state_);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform double in (0, 1].
  double uniform_pos() { return 1.0 - uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  double exponential(double mean) { return -mean * std::log(uniform_pos()); }

  /// Number of failures before the first success of a Bernoulli(p) trial.
  /// p must be in (0, 1].
  std::uint64_t geometric(double p) {
    if (p >= 1.0) return 0;
    const double g = std::floor(std::log(uniform_pos()) / std::log1p(-p));
    if (!(g < 1.8e19)) return std::numeric_limits<std::uint64_t>::max();
    return static_cast<std::uint64_t>(g);
  }

  /// Standard normal deviate (Box-Muller, one value per call).
  double normal() {
    const double u1 = uniform_pos();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

 private:
  std::uint64_t state_;
};

}  // namespace heraldsim
