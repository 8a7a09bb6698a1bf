#pragma once

#include <cstdint>
#include <vector>

#include "mdsd/draft.hpp"
#include "mdsd/prob.hpp"
#include "mdsd/verify.hpp"

namespace mdsd {

struct McReport {
  std::uint64_t trials = 0;
  std::uint64_t accepted = 0;
  double acceptance_mean = 0.0;
  /// sqrt(mean * (1 - mean) / trials)
  double acceptance_stderr = 0.0;
  std::vector<std::uint64_t> output_counts;
  std::vector<double> empirical_marginal;
  double tv_to_target = 0.0;
  std::uint64_t seed = 0;

  friend bool operator==(const McReport&, const McReport&) = default;
};

struct TvTestResult {
  bool pass = false;
  double statistic = 0.0;
  double threshold = 0.0;
};

/// Number of worker threads: MDSD_THREADS if set and positive, else the hardware default.
unsigned worker_threads();

/**
 * Runs `trials` independent draft-then-verify steps. Trial t uses the random
 * substream (seed, t), so the report is bit-identical for any thread count.
 * A trial is accepted when the output equals one of its drafts.
 */
McReport estimate_alpha(const Dist& p, const DraftScheme& scheme, const VerifierKernel& kernel, std::uint64_t trials,
                        std::uint64_t seed, unsigned threads = 0);
McReport estimate_alpha(const Dist& p, const DraftScheme& scheme, Method method, std::uint64_t trials,
                        std::uint64_t seed, unsigned threads = 0);

/// Pass when TV(empirical, p) <= 3 * sqrt(|vocab| / trials).
TvTestResult tv_test(const McReport& report, const Dist& p, std::uint64_t trials);

}  // namespace mdsd
