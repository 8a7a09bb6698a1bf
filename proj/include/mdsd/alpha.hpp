#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mdsd/draft.hpp"
#include "mdsd/prob.hpp"

namespace mdsd {

/// Result of the prefix scan: alpha* = 1 + min over prefixes of P(H) - Q(H).
struct ScanResult {
  double alpha_star = 1.0;
  double min_f = 0.0;
  /// Length of the minimizing prefix (0 = empty set).
  std::size_t argmin_prefix_len = 0;
  std::vector<Token> ordering;
  /// f of every prefix, f_values[0] = f(empty) = 0, f_values[vocab] = f(all).
  std::vector<double> f_values;
};

/// Optimal single-draft acceptance: sum_i min(p(i), q(i)).
double alpha_single_draft(const Dist& p, const Dist& q);

/// Tokens by q/p descending; p = 0 tokens first (ratio +inf); ties by lowest id.
std::vector<Token> ratio_order(const Dist& p, const Dist& q);

/// Scan order for a scheme: ratio order against q, except that Greedy and
/// SpecHub lead with their deterministic top tokens and order the rest by tail/p.
std::vector<Token> scan_order(const Dist& p, const DraftScheme& scheme);

/// Optimal acceptance rate by sorted linear search over prefixes.
/// Supports WithReplacement, WithoutReplacement, Greedy and SpecHub.
ScanResult alpha_scan(const Dist& p, const DraftScheme& scheme);

/// Closed-form optimal acceptance rate of the greedy draft construction.
double alpha_greedy_closed(const Dist& p, const Dist& q, std::size_t n);

using SubsetMask = std::uint32_t;
/// Subset mass function: Q(H) for H given as a bit mask over token ids.
using SubsetMass = std::function<double(SubsetMask)>;

inline constexpr std::size_t kBruteForceMaxVocab = 20;

/// 1 + min over all 2^|vocab| subsets of P(H) - Q(H).
double alpha_bruteforce(const Dist& p, const SubsetMass& subset_mass);

/// Q(H) for every mask, by enumerating all tuples of the scheme (vocab^n <= 20000).
std::vector<double> enumerate_subset_mass(const DraftScheme& scheme);

}  // namespace mdsd
