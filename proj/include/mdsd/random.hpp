#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "mdsd/prob.hpp"

namespace mdsd {

/**
 * Counter-based random stream.
 *
 * A stream is identified by (seed, stream_id); Monte Carlo code opens one
 * stream per trial index, so results do not depend on how trials are split
 * across threads. The generator is SplitMix64 started from a mixed key.
 */
class RandomStream {
 public:
  using result_type = std::uint64_t;

  explicit RandomStream(std::uint64_t seed, std::uint64_t stream_id = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  bool bernoulli(double prob) { return uniform() < prob; }

 private:
  std::uint64_t state_;
};

/// Mixes two 64-bit words into one; used to derive seeds for sub-experiments.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

/// Inverse-CDF draw from a probability vector by linear scan.
Token sample_index(std::span<const double> mass, double u);

/// Precomputed cumulative table for repeated draws from one distribution.
class CategoricalSampler {
 public:
  CategoricalSampler() = default;
  explicit CategoricalSampler(const Dist& dist);

  Token operator()(RandomStream& rng) const;
  std::size_t size() const { return cdf_.size(); }

 private:
  std::vector<double> cdf_;
  Token last_positive_ = 0;
};

}  // namespace mdsd
