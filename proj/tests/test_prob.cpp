#include <cmath>
#include <random>

#include "doctest.h"
#include "mdsd/prob.hpp"
#include "mdsd/random.hpp"
#include "oracles.hpp"

using namespace mdsd;

TEST_CASE("dist validates and normalizes") {
  const Dist d({1.0, 3.0});
  CHECK(d[0] == doctest::Approx(0.25));
  CHECK(d[1] == doctest::Approx(0.75));
  CHECK(d.support_size() == 2);
  CHECK_THROWS_AS(Dist({}), Error);
  CHECK_THROWS_AS(Dist({0.0, 0.0}), Error);
  CHECK_THROWS_AS(Dist({-0.1, 1.0}), Error);
  CHECK_THROWS_AS(Dist({NAN, 1.0}), Error);
  CHECK_THROWS_AS(Dist::one_hot(3, 3), Error);
}

TEST_CASE("softmax with temperature") {
  const std::vector<double> logits{0.0, 0.0, 0.0};
  const Dist u = softmax_temp(logits, 1.0);
  for (Token i = 0; i < 3; ++i) CHECK(u[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  const std::vector<double> l2{std::log(0.2), std::log(0.3), std::log(0.5)};
  const Dist d = softmax_temp(l2, 1.0);
  CHECK(d[2] == doctest::Approx(0.5).epsilon(1e-12));

  // Halving the temperature squares the probabilities before renormalizing.
  const Dist sharp = softmax_temp(l2, 0.5);
  CHECK(sharp[2] == doctest::Approx(0.25 / (0.04 + 0.09 + 0.25)).epsilon(1e-12));

  const std::vector<double> tie{1.0, 2.0, 2.0};
  const Dist greedy = softmax_temp(tie, 0.0);
  CHECK(greedy == Dist::one_hot(3, 1));

  const std::vector<double> big{1000.0, 999.0};
  const Dist stable = softmax_temp(big, 1.0);
  CHECK(stable[0] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));

  CHECK_THROWS_AS(softmax_temp(std::vector<double>{}, 1.0), Error);
  CHECK_THROWS_AS(softmax_temp(l2, -1.0), Error);
  CHECK_THROWS_AS(softmax_temp(std::vector<double>{INFINITY, 0.0}, 1.0), Error);
}

TEST_CASE("residual distribution") {
  const Dist p({0.05, 0.05, 0.9});
  const Dist q({0.5, 0.3, 0.2});
  const Dist r = residual_dist(p, q);
  CHECK(r == Dist::one_hot(3, 2));
  CHECK(residual_dist(p, p) == Dist::uniform(3));
  CHECK_THROWS_AS(residual_dist(p, Dist::uniform(2)), Error);
}

TEST_CASE("exclude and renormalize") {
  const Dist q({0.5, 0.3, 0.2});
  const Dist e = exclude_renorm(q, TokenSet({0}));
  CHECK(e[0] == 0.0);
  CHECK(e[1] == doctest::Approx(0.6));
  CHECK(e[2] == doctest::Approx(0.4));
  CHECK_THROWS_WITH_AS(exclude_renorm(Dist::one_hot(3, 1), TokenSet({1})), "exhausted support", Error);
}

TEST_CASE("top-k ordering and ties") {
  const Dist q({0.2, 0.3, 0.3, 0.2});
  CHECK(top_k_ordered(q, 3) == std::vector<Token>{1, 2, 0});
  CHECK(top_k(q, 2) == TokenSet({1, 2}));
  CHECK(top_k_ordered(q, 0).empty());
  CHECK_THROWS_AS(top_k_ordered(q, 5), Error);
}

TEST_CASE("token sets") {
  const TokenSet s({3, 1, 3, 0});
  CHECK(s.size() == 3);
  CHECK(s.contains(3));
  CHECK_FALSE(s.contains(2));
  CHECK(TokenSet::from_mask(0b1011) == TokenSet({0, 1, 3}));
}

TEST_CASE("tv distance") {
  const Dist a({0.5, 0.5, 0.0});
  const Dist b({0.0, 0.5, 0.5});
  CHECK(tv_distance(a, b) == doctest::Approx(0.5));
  CHECK(tv_distance(a, a) == 0.0);
}

TEST_CASE("property: residual is supported where p exceeds q") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const Dist p = oracle::sparse_dirichlet(rng, 7, 0.3, 1);
    const Dist q = oracle::sparse_dirichlet(rng, 7, 0.3, 1);
    const Dist r = residual_dist(p, q);
    const double overlap = oracle::sum_min(p, q);
    for (Token i = 0; i < 7; ++i) {
      if (overlap < 1.0 - 1e-9) {
        // r = (p - q)_+ / (1 - sum min(p, q))
        CHECK(r[i] == doctest::Approx(std::max(p[i] - q[i], 0.0) / (1.0 - overlap)).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("random streams are reproducible and independent of order") {
  RandomStream a(42, 7);
  RandomStream b(42, 7);
  for (int i = 0; i < 100; ++i) CHECK(a() == b());
  RandomStream c(42, 8);
  RandomStream d(42, 7);
  CHECK(c() != d());
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("categorical sampler frequencies") {
  const Dist d({0.1, 0.0, 0.6, 0.3});
  const CategoricalSampler s(d);
  RandomStream rng(3);
  std::vector<int> counts(4, 0);
  const int trials = 200000;
  for (int i = 0; i < trials; ++i) ++counts[s(rng)];
  CHECK(counts[1] == 0);
  for (Token i = 0; i < 4; ++i) {
    const double se = std::sqrt(d[i] * (1 - d[i]) / trials);
    CHECK(std::abs(counts[i] / double(trials) - d[i]) <= 4 * se + 1e-12);
  }
  CHECK(sample_index(d.mass(), 0.0) == 0);
  CHECK(sample_index(d.mass(), 0.99999999999) == 3);
  CHECK(sample_index(d.mass(), 1.5) == 3);
}

TEST_CASE("worked examples") {
  const Dist two = softmax_temp(std::vector<double>{std::log(2.0), 0.0}, 1.0);
  CHECK(two[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(softmax_temp(std::vector<double>{5, 1, 1}, 0.0) == Dist::one_hot(3, 0));
  CHECK(residual_dist(Dist({0.6, 0.4}), Dist({0.4, 0.6})) == Dist::one_hot(2, 0));
  CHECK(residual_dist(Dist({0.5, 0.3, 0.2}), Dist({0.2, 0.5, 0.3})) == Dist::one_hot(3, 0));
  CHECK(exclude_renorm(Dist::uniform(4), TokenSet()) == Dist::uniform(4));
  CHECK_THROWS_WITH_AS(exclude_renorm(Dist({0.5, 0.5, 0.0}), TokenSet({0, 1})), "exhausted support", Error);
  CHECK(top_k(Dist({0.5, 0.3, 0.2}), 1) == TokenSet({0}));
  CHECK(top_k(Dist({0.4, 0.4, 0.2}), 1) == TokenSet({0}));
  CHECK(top_k(Dist({0.1, 0.2, 0.3, 0.4}), 2) == TokenSet({2, 3}));
}

TEST_CASE("property: softmax shift invariance, nested top-k, proportional exclusion") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss(0.0, 3.0);
  std::uniform_real_distribution<double> temp(0.05, 2.0);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t vocab = 2 + trial % 9;
    std::vector<double> logits(vocab);
    for (double& l : logits) l = gauss(rng);
    std::vector<double> shifted = logits;
    const double c = gauss(rng) * 10.0;
    for (double& l : shifted) l += c;
    const double t = temp(rng);
    CHECK(tv_distance(softmax_temp(logits, t), softmax_temp(shifted, t)) <= 1e-12);

    const Dist q = softmax_temp(logits, t);
    double total = 0.0;
    for (double m : q.mass()) total += m;
    CHECK(std::abs(total - 1.0) <= 1e-9);
    for (std::size_t k = 0; k < vocab; ++k) {
      const TokenSet small = top_k(q, k);
      const TokenSet big = top_k(q, k + 1);
      for (Token x : small) CHECK(big.contains(x));
    }

    const TokenSet excluded = TokenSet::from_mask(rng() & ((1ULL << (vocab - 1)) - 1));
    double kept = 0.0;
    for (Token i = 0; i < vocab; ++i) kept += excluded.contains(i) ? 0.0 : q[i];
    if (kept <= 1e-9) continue;
    const Dist e = exclude_renorm(q, excluded);
    for (Token i = 0; i < vocab; ++i) {
      CHECK(e[i] == doctest::Approx(excluded.contains(i) ? 0.0 : q[i] / kept).epsilon(1e-12));
    }
    const Dist r = residual_dist(q, softmax_temp(shifted, temp(rng)));
    double rsum = 0.0;
    for (double m : r.mass()) {
      CHECK(m >= 0.0);
      rsum += m;
    }
    CHECK(std::abs(rsum - 1.0) <= 1e-9);
  }
}
