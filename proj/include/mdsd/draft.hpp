#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "mdsd/prob.hpp"
#include "mdsd/random.hpp"

namespace mdsd {

enum class SchemeKind { WithReplacement, WithoutReplacement, Product, Greedy, SpecHub };

std::string_view to_string(SchemeKind kind);

using DraftTuple = std::vector<Token>;

/**
 * How the n draft tokens of one decoding step are produced.
 *
 * - WithReplacement: n iid draws from q.
 * - WithoutReplacement: sequential draws, each from q with earlier draws
 *   excluded and the rest renormalized.
 * - Product: one draw from each of q_1..q_n.
 * - Greedy: the top n-1 tokens of q (descending), then one draw from the
 *   tail distribution q with the top n-1 excluded.
 * - SpecHub (n = 2): first draw from q; if it is the top-1 token the second
 *   comes from the tail, otherwise the second is the top-1 token.
 *
 * When the top tokens of a Greedy/SpecHub scheme carry all of q's mass the
 * tail is taken to be uniform over the remaining tokens.
 */
class DraftScheme {
 public:
  static DraftScheme with_replacement(Dist q, std::size_t n);
  static DraftScheme without_replacement(Dist q, std::size_t n);
  static DraftScheme product(std::vector<Dist> factors);
  static DraftScheme greedy(Dist q, std::size_t n);
  static DraftScheme spechub(Dist q);

  SchemeKind kind() const { return kind_; }
  std::size_t num_drafts() const { return n_; }
  std::size_t vocab_size() const { return q_.size(); }

  /// The draft model distribution (first factor for Product schemes).
  const Dist& q() const { return q_; }
  const std::vector<Dist>& factors() const { return factors_; }

  /// Deterministic leading drafts (Greedy: Top_{n-1}(q) in descending order; SpecHub: Top_1(q)).
  const std::vector<Token>& top() const { return top_; }
  /// Distribution of the sampled tail draft (Greedy/SpecHub only).
  const Dist& tail() const { return tail_; }

  DraftTuple sample(RandomStream& rng) const;

 private:
  DraftScheme(SchemeKind kind, Dist q, std::size_t n);

  SchemeKind kind_;
  Dist q_;
  std::size_t n_;
  std::vector<Dist> factors_;
  std::vector<Token> top_;
  Dist tail_;
  std::vector<CategoricalSampler> samplers_;  // q, or one per factor
  CategoricalSampler tail_sampler_;
};

DraftTuple sample_tuple(const DraftScheme& scheme, RandomStream& rng);

/// Probability of the ordered tuple under the scheme; 0 outside the support.
double tuple_prob(const DraftScheme& scheme, std::span<const Token> tuple);

/// Calls fn(tuple) for every tuple in vocab^n in lexicographic order.
void for_each_tuple(std::size_t vocab_size, std::size_t n, const std::function<void(std::span<const Token>)>& fn);

/**
 * Incremental evaluator of the subset mass Q(H) = sum over tuples in H^n.
 *
 * Tokens are added one at a time; value() returns Q of the tokens added so
 * far. WithReplacement: (sum q)^n. WithoutReplacement: W_{n,H} / W_{n,vocab}
 * where W_{k,H} is the t^k coefficient of prod_{x in H} (1 + q(x) t).
 * Greedy/SpecHub: tail mass of H once every top token is in H, else 0.
 */
class PrefixQEvaluator {
 public:
  explicit PrefixQEvaluator(const DraftScheme& scheme);

  void add(Token x);
  double value() const;
  void reset();

 private:
  SchemeKind kind_;
  std::size_t n_;
  std::vector<double> q_;
  // WithReplacement: running q mass. Greedy/SpecHub: running tail mass.
  double mass_ = 0.0;
  // WithoutReplacement.
  std::vector<double> coeffs_;
  double full_coeff_ = 1.0;
  // Greedy/SpecHub.
  std::vector<char> is_top_;
  std::size_t tops_added_ = 0;
  std::size_t num_top_ = 0;
};

PrefixQEvaluator make_prefix_q(const DraftScheme& scheme);

/// Elementary symmetric polynomial coefficients e_0..e_n of the given masses.
std::vector<double> elementary_symmetric(std::span<const double> values, std::size_t n);

}  // namespace mdsd
