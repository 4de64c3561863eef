#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace vlbirl {

/// Seeded random stream with pinned value mappings.
///
/// std::mt19937_64 output is fully specified by the standard, but the
/// std::*_distribution adapters are not, so this class maps raw engine
/// output to doubles itself. Identical seeds therefore produce identical
/// streams on every platform, which the reproducibility contract of the
/// whole project rests on.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform double in [0, 1), 53 significant bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Multiply-shift mapping; the bias of at most
  /// n / 2^64 is irrelevant at the sample sizes used here.
  int uniform_int(int n) {
    return static_cast<int>(
        (static_cast<unsigned __int128>(next_u64()) * static_cast<unsigned __int128>(n)) >> 64);
  }

  std::size_t uniform_index(std::size_t n) {
    return static_cast<std::size_t>(
        (static_cast<unsigned __int128>(next_u64()) * static_cast<unsigned __int128>(n)) >> 64);
  }

  /// Standard normal via Box-Muller. Consumes exactly two uniforms per call
  /// so the stream layout stays stable.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi_ * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  static constexpr double two_pi_ = 6.283185307179586476925286766559;
  std::mt19937_64 gen_;
};

/// Deterministic child-seed derivation (splitmix64 finalizer). Used to give
/// every rollout, evaluation pass, and initializer its own stream.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace vlbirl
