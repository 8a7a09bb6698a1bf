#pragma once

#include <gmpxx.h>

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "mdsd/alpha.hpp"
#include "mdsd/draft.hpp"
#include "mdsd/prob.hpp"

namespace mdsd {

class VerifierKernel;

namespace exact {

/// Exact probability; mpq_class keeps values in canonical reduced form.
using Rational = mpq_class;

/// Exact distribution built from an integer grid: mass(i) = counts(i) / sum(counts).
class RationalDist {
 public:
  explicit RationalDist(std::vector<Rational> mass);
  static RationalDist from_counts(std::span<const long> counts);

  std::size_t size() const { return mass_.size(); }
  const Rational& operator[](Token i) const { return mass_[i]; }
  const std::vector<Rational>& mass() const { return mass_; }
  std::size_t support_size() const;

  Dist to_dist() const;

 private:
  std::vector<Rational> mass_;
};

/// Rational counterpart of DraftScheme. Tuple probabilities are computed
/// here from the scheme definitions, independently of the floating-point path.
struct ExactScheme {
  SchemeKind kind = SchemeKind::WithReplacement;
  std::vector<RationalDist> factors;  // {q}, or q_1..q_n for Product
  std::size_t n = 1;

  const RationalDist& q() const { return factors.front(); }
  std::size_t vocab_size() const { return factors.front().size(); }
  DraftScheme to_float() const;
};

inline constexpr std::size_t kMaxTuples = 20000;

/// Probabilities of all vocab^n tuples, indexed in base-vocab lexicographic order.
std::vector<Rational> exact_tuple_probs(const ExactScheme& scheme);

/**
 * Bipartite network: source -> token i (capacity p(i)), token i -> tuple t
 * for every t containing i (unbounded), tuple t -> sink (capacity p_draft(t)).
 * Max flow is solved by BFS augmenting paths on exact rationals.
 */
class FlowNetwork {
 public:
  explicit FlowNetwork(std::size_t num_nodes);

  void add_edge(std::size_t from, std::size_t to, const Rational& capacity);
  Rational max_flow(std::size_t source, std::size_t sink);

 private:
  struct Edge {
    std::size_t to;
    std::size_t reverse;
    Rational residual;
  };
  std::vector<std::vector<Edge>> adj_;
};

/// Optimal acceptance rate as an exact max-flow value. `tuple_order`, when
/// non-empty, permutes the order in which tuple nodes are created.
Rational alpha_maxflow(const RationalDist& p, const ExactScheme& scheme, std::span<const std::size_t> tuple_order = {});

/// P(all n sequential without-replacement draws from q land in H), by direct enumeration.
Rational q_sequential_exact(const RationalDist& q, const TokenSet& subset, std::size_t n);

/// Q(H) for every subset mask, summed exactly over the scheme's tuples.
std::vector<Rational> exact_subset_mass(const ExactScheme& scheme);

/// 1 + min over all subsets of P(H) - Q(H), exactly.
Rational alpha_bruteforce_exact(const RationalDist& p, const std::function<Rational(SubsetMask)>& subset_mass);

/// Output law sum_t p_draft(t) * pi(. | t) of a verifier, by enumeration of all
/// tuples. Returned unnormalized so that lost or surplus mass stays visible.
std::vector<double> verifier_marginal_exact(const Dist& p, const DraftScheme& scheme, const VerifierKernel& kernel);

/// Probability that the verifier outputs one of the drafts, by enumeration.
double verifier_acceptance_exact(const DraftScheme& scheme, const VerifierKernel& kernel);

}  // namespace exact
}  // namespace mdsd
