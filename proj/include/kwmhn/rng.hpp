#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace kwmhn {

/// splitmix64 finalizer; used to derive independent child seeds.
std::uint64_t mix64(std::uint64_t x);

/// Seed of child stream `index` under `parent`. Experiment seed -> run seed ->
/// per-purpose stream, so every run is reproducible on its own.
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index);

/// Deterministic 64-bit generator. Satisfies UniformRandomBitGenerator so it
/// plugs into <algorithm> and <random>.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(mix64(seed)) {}

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  std::uint64_t seed() const { return seed_; }

  /// Independent generator for sub-stream `index`.
  Rng split(std::uint64_t index) const { return Rng(derive_seed(seed_, index)); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer on [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n);

  double normal(double mean, double sd);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace kwmhn
