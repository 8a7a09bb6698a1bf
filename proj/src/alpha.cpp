#include "mdsd/alpha.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mdsd {

namespace {

constexpr std::size_t kMaxEnumeratedTuples = 20000;

std::size_t checked_tuple_count(std::size_t vocab, std::size_t n) {
  std::size_t count = 1;
  for (std::size_t j = 0; j < n; ++j) {
    count *= vocab;
    if (count > kMaxEnumeratedTuples) throw Error("tuple enumeration guard exceeded (vocab^n > 20000)");
  }
  return count;
}

}  // namespace

double alpha_single_draft(const Dist& p, const Dist& q) {
  require_same_size(p, q);
  double s = 0.0;
  for (Token i = 0; i < p.size(); ++i) s += std::min(p[i], q[i]);
  return s;
}

std::vector<Token> ratio_order(const Dist& p, const Dist& q) {
  require_same_size(p, q);
  std::vector<double> ratio(p.size());
  for (Token i = 0; i < p.size(); ++i) {
    ratio[i] = p[i] > 0.0 ? q[i] / p[i] : std::numeric_limits<double>::infinity();
  }
  std::vector<Token> order(p.size());
  std::iota(order.begin(), order.end(), Token{0});
  std::stable_sort(order.begin(), order.end(), [&](Token a, Token b) { return ratio[a] > ratio[b]; });
  return order;
}

std::vector<Token> scan_order(const Dist& p, const DraftScheme& scheme) {
  switch (scheme.kind()) {
    case SchemeKind::WithReplacement:
    case SchemeKind::WithoutReplacement:
      return ratio_order(p, scheme.q());
    case SchemeKind::Greedy:
    case SchemeKind::SpecHub: {
      // Any H missing a top token has Q(H) = 0, so the minimizer can be taken
      // to contain all of them; beyond that Q is additive in the tail mass.
      std::vector<Token> order = scheme.top();
      std::vector<char> is_top(p.size(), 0);
      for (Token t : order) is_top[t] = 1;
      for (Token t : ratio_order(p, scheme.tail())) {
        if (!is_top[t]) order.push_back(t);
      }
      return order;
    }
    case SchemeKind::Product:
      break;
  }
  throw Error("no fast Q; use oracle");
}

ScanResult alpha_scan(const Dist& p, const DraftScheme& scheme) {
  if (p.size() != scheme.vocab_size()) throw Error("vocabulary size mismatch between p and draft scheme");
  PrefixQEvaluator q_eval(scheme);
  ScanResult r;
  r.ordering = scan_order(p, scheme);
  r.f_values.reserve(p.size() + 1);
  r.f_values.push_back(0.0);
  double prefix_p = 0.0;
  for (std::size_t k = 0; k < r.ordering.size(); ++k) {
    const Token x = r.ordering[k];
    prefix_p += p[x];
    q_eval.add(x);
    const double f = prefix_p - q_eval.value();
    r.f_values.push_back(f);
    if (f < r.min_f) {
      r.min_f = f;
      r.argmin_prefix_len = k + 1;
    }
  }
  r.alpha_star = 1.0 + r.min_f;
  return r;
}

double alpha_greedy_closed(const Dist& p, const Dist& q, std::size_t n) {
  require_same_size(p, q);
  const DraftScheme scheme = DraftScheme::greedy(q, n);
  double alpha = 0.0;
  for (Token t : scheme.top()) alpha += p[t];
  const Dist& tail = scheme.tail();
  for (Token i = 0; i < p.size(); ++i) alpha += std::min(p[i], tail[i]);
  return alpha;
}

double alpha_bruteforce(const Dist& p, const SubsetMass& subset_mass) {
  const std::size_t vocab = p.size();
  if (vocab > kBruteForceMaxVocab) throw Error("alpha_bruteforce: vocabulary too large (max 20)");
  const SubsetMask full = static_cast<SubsetMask>((std::uint64_t{1} << vocab) - 1);
  double best = 0.0;
  for (SubsetMask h = 0;; ++h) {
    double mass_p = 0.0;
    for (Token i = 0; i < vocab; ++i) {
      if (h >> i & 1U) mass_p += p[i];
    }
    best = std::min(best, mass_p - subset_mass(h));
    if (h == full) break;
  }
  return 1.0 + best;
}

std::vector<double> enumerate_subset_mass(const DraftScheme& scheme) {
  const std::size_t vocab = scheme.vocab_size();
  if (vocab > kBruteForceMaxVocab) throw Error("enumerate_subset_mass: vocabulary too large (max 20)");
  checked_tuple_count(vocab, scheme.num_drafts());
  // Mass of tuples by the exact set of tokens they use, then a subset-sum
  // (zeta) transform so table[H] sums every tuple whose tokens lie in H.
  std::vector<double> table(std::size_t{1} << vocab, 0.0);
  for_each_tuple(vocab, scheme.num_drafts(), [&](std::span<const Token> t) {
    SubsetMask m = 0;
    for (Token x : t) m |= SubsetMask{1} << x;
    table[m] += tuple_prob(scheme, t);
  });
  for (std::size_t bit = 0; bit < vocab; ++bit) {
    for (std::size_t h = 0; h < table.size(); ++h) {
      if (h >> bit & 1U) table[h] += table[h ^ (std::size_t{1} << bit)];
    }
  }
  return table;
}

}  // namespace mdsd
