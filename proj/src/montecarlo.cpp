#include "mdsd/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

#include "mdsd/random.hpp"

namespace mdsd {

unsigned worker_threads() {
  if (const char* env = std::getenv("MDSD_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
      // Unparsable values fall through to the hardware default.
    }
  }
  return std::max(1U, std::thread::hardware_concurrency());
}

namespace {

struct Tally {
  std::uint64_t accepted = 0;
  std::vector<std::uint64_t> counts;
};

void run_trials(const DraftScheme& scheme, const VerifierKernel& kernel, std::uint64_t begin, std::uint64_t end,
                std::uint64_t seed, Tally& tally) {
  for (std::uint64_t t = begin; t < end; ++t) {
    RandomStream rng(seed, t);
    const DraftTuple drafts = scheme.sample(rng);
    const Token out = kernel.sample(drafts, rng);
    ++tally.counts[out];
    if (std::find(drafts.begin(), drafts.end(), out) != drafts.end()) ++tally.accepted;
  }
}

}  // namespace

McReport estimate_alpha(const Dist& p, const DraftScheme& scheme, const VerifierKernel& kernel, std::uint64_t trials,
                        std::uint64_t seed, unsigned threads) {
  if (trials == 0) throw Error("estimate_alpha: trials must be >= 1");
  if (p.size() != scheme.vocab_size()) throw Error("vocabulary size mismatch between p and draft scheme");
  if (threads == 0) threads = worker_threads();
  threads = static_cast<unsigned>(std::min<std::uint64_t>(threads, trials));

  std::vector<Tally> tallies(threads);
  for (Tally& t : tallies) t.counts.assign(p.size(), 0);
  const std::uint64_t chunk = (trials + threads - 1) / threads;

  if (threads == 1) {
    run_trials(scheme, kernel, 0, trials, seed, tallies[0]);
  } else {
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    for (unsigned w = 0; w < threads; ++w) {
      const std::uint64_t begin = w * chunk;
      const std::uint64_t end = std::min(trials, begin + chunk);
      pool.emplace_back([&, w, begin, end] {
        try {
          run_trials(scheme, kernel, begin, end, seed, tallies[w]);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }

  // Integer tallies make the merge exact and independent of the split.
  McReport r;
  r.trials = trials;
  r.seed = seed;
  r.output_counts.assign(p.size(), 0);
  for (const Tally& t : tallies) {
    r.accepted += t.accepted;
    for (std::size_t i = 0; i < p.size(); ++i) r.output_counts[i] += t.counts[i];
  }
  const double n = static_cast<double>(trials);
  r.acceptance_mean = static_cast<double>(r.accepted) / n;
  r.acceptance_stderr = std::sqrt(r.acceptance_mean * (1.0 - r.acceptance_mean) / n);
  r.empirical_marginal.resize(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) r.empirical_marginal[i] = static_cast<double>(r.output_counts[i]) / n;
  r.tv_to_target = tv_distance(r.empirical_marginal, p.mass());
  return r;
}

McReport estimate_alpha(const Dist& p, const DraftScheme& scheme, Method method, std::uint64_t trials,
                        std::uint64_t seed, unsigned threads) {
  const auto kernel = make_kernel(method, p, scheme);
  return estimate_alpha(p, scheme, *kernel, trials, seed, threads);
}

TvTestResult tv_test(const McReport& report, const Dist& p, std::uint64_t trials) {
  if (trials == 0) throw Error("tv_test: trials must be >= 1");
  TvTestResult r;
  r.statistic = tv_distance(report.empirical_marginal, p.mass());
  r.threshold = 3.0 * std::sqrt(static_cast<double>(p.size()) / static_cast<double>(trials));
  r.pass = r.statistic <= r.threshold;
  return r;
}

}  // namespace mdsd
