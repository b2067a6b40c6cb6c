#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace fhcac {

// Seedable, splittable generator. Every sampling routine takes one of these
// explicitly; two generators built from the same seed produce the same
// stream on every platform (no std::*_distribution is involved).
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0);

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform();

  // Uniform integer in [0, n).
  int uniform_int(int n);

  // Inverse-CDF draw from a probability vector. The last index with positive
  // mass absorbs any rounding shortfall.
  int categorical(std::span<const double> probs);

  // Child generator with a statistically independent stream. Advances this
  // generator by one draw.
  Rng split();

 private:
  std::mt19937_64 engine_;
};

// SplitMix64 finalizer; used to decorrelate derived seeds.
std::uint64_t mix_seed(std::uint64_t x);

}  // namespace fhcac
