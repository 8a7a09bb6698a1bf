#include <cmath>
#include <random>

#include "doctest.h"
#include "mdsd/alpha.hpp"
#include "mdsd/montecarlo.hpp"
#include "oracles.hpp"

using namespace mdsd;

namespace {

const Dist kP({0.05, 0.05, 0.9});
const Dist kQ({0.5, 0.3, 0.2});

/// Outputs the first draft unconditionally; a deliberately biased negative control.
class FirstDraftKernel final : public VerifierKernel {
 public:
  explicit FirstDraftKernel(std::size_t vocab) : vocab_(vocab) {}
  std::string_view name() const override { return "first-draft"; }
  Token sample(std::span<const Token> drafts, RandomStream&) const override { return drafts[0]; }
  std::vector<double> conditional(std::span<const Token> drafts) const override {
    std::vector<double> out(vocab_, 0.0);
    out[drafts[0]] = 1.0;
    return out;
  }

 private:
  std::size_t vocab_;
};

bool within_3_sigma(double estimate, double truth, std::uint64_t trials) {
  return std::abs(estimate - truth) <= 3.0 * std::sqrt(truth * (1.0 - truth) / double(trials)) + 1e-12;
}

}  // namespace

TEST_CASE("identical target and draft accept every trial") {
  for (Method m : {Method::RrsWith, Method::Kseq}) {
    const McReport r = estimate_alpha(kQ, DraftScheme::with_replacement(kQ, 3), m, 10000, 1);
    CHECK(r.acceptance_mean == 1.0);
    CHECK(r.accepted == 10000);
    CHECK(r.acceptance_stderr == 0.0);
  }
  CHECK(estimate_alpha(kQ, DraftScheme::without_replacement(kQ, 2), Method::RrsWithout, 10000, 1).acceptance_mean == 1.0);
  CHECK(estimate_alpha(kQ, DraftScheme::greedy(kQ, 2), Method::Greedy, 10000, 1).acceptance_mean == 1.0);
}

TEST_CASE("estimates agree with exact rates") {
  const McReport rrs = estimate_alpha(kP, DraftScheme::with_replacement(kQ, 2), Method::RrsWith, 100000, 7);
  CHECK(within_3_sigma(rrs.acceptance_mean, 0.44, 100000));
  const McReport ot = estimate_alpha(kP, DraftScheme::with_replacement(kQ, 1), Method::OtSingle, 100000, 8);
  CHECK(within_3_sigma(ot.acceptance_mean, alpha_single_draft(kP, kQ), 100000));
  CHECK(rrs.acceptance_stderr == doctest::Approx(std::sqrt(rrs.acceptance_mean * (1 - rrs.acceptance_mean) / 1e5)));
  CHECK(rrs.tv_to_target >= 0.0);
  CHECK(rrs.tv_to_target <= 1.0);
}

TEST_CASE("reports are bit-identical across runs and thread counts") {
  const DraftScheme s = DraftScheme::without_replacement(kQ, 2);
  const McReport a = estimate_alpha(kP, s, Method::RrsWithout, 20000, 99, 1);
  const McReport b = estimate_alpha(kP, s, Method::RrsWithout, 20000, 99, 1);
  const McReport c = estimate_alpha(kP, s, Method::RrsWithout, 20000, 99, 3);
  const McReport d = estimate_alpha(kP, s, Method::RrsWithout, 20000, 99, 7);
  CHECK(a == b);
  CHECK(a == c);
  CHECK(a == d);
  const McReport e = estimate_alpha(kP, s, Method::RrsWithout, 20000, 100, 1);
  CHECK_FALSE(a == e);
}

TEST_CASE("incompatible pairs and bad arguments") {
  CHECK_THROWS_AS(estimate_alpha(kP, DraftScheme::with_replacement(kQ, 2), Method::Greedy, 10, 1), Error);
  CHECK_THROWS_AS(estimate_alpha(kP, DraftScheme::with_replacement(kQ, 2), Method::RrsWith, 0, 1), Error);
  CHECK_THROWS_AS(estimate_alpha(Dist::uniform(2), DraftScheme::with_replacement(kQ, 2), Method::RrsWith, 10, 1), Error);
}

TEST_CASE("distribution test: correct kernels pass, biased kernel fails") {
  std::mt19937_64 rng(61);
  const Dist p = oracle::dirichlet(rng, 100);
  const Dist q = oracle::dirichlet(rng, 100);
  const std::uint64_t trials = 1000000;
  const DraftScheme w = DraftScheme::with_replacement(q, 3);

  const McReport good = estimate_alpha(p, w, Method::RrsWith, trials, 3);
  const TvTestResult pass = tv_test(good, p, trials);
  CHECK(pass.threshold == doctest::Approx(0.03));
  CHECK(pass.pass);

  const McReport bad = estimate_alpha(p, w, FirstDraftKernel(100), trials, 3);
  const TvTestResult fail = tv_test(bad, p, trials);
  CHECK_FALSE(fail.pass);
  CHECK(fail.statistic > fail.threshold);

  // One-hot target: every correct kernel reproduces it exactly.
  const Dist hot = Dist::one_hot(100, 17);
  const McReport exact_hit = estimate_alpha(hot, w, Method::RrsWith, 20000, 4);
  CHECK(exact_hit.tv_to_target == 0.0);
  CHECK(tv_test(exact_hit, hot, 20000).pass);
}

TEST_CASE("empirical marginal is a distribution") {
  const McReport r = estimate_alpha(kP, DraftScheme::greedy(kQ, 2), Method::Greedy, 5000, 2);
  double total = 0.0;
  for (double m : r.empirical_marginal) {
    CHECK(m >= 0.0);
    total += m;
  }
  CHECK(total == doctest::Approx(1.0));
  CHECK(r.acceptance_mean >= 0.0);
  CHECK(r.acceptance_mean <= 1.0);
}
