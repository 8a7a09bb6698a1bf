#include "mdsd/prob.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

namespace mdsd {

Dist::Dist(std::vector<double> mass) : mass_(std::move(mass)) {
  if (mass_.empty()) throw Error("empty distribution");
  double total = 0.0;
  for (double m : mass_) {
    if (!std::isfinite(m) || m < 0.0) throw Error("distribution entries must be finite and non-negative");
    total += m;
  }
  if (!(total > 0.0)) throw Error("distribution has zero total mass");
  for (double& m : mass_) m /= total;
}

Dist Dist::uniform(std::size_t vocab_size) {
  return Dist(std::vector<double>(vocab_size, 1.0));
}

Dist Dist::one_hot(std::size_t vocab_size, Token hot) {
  if (hot >= vocab_size) throw Error("one_hot: token out of range");
  std::vector<double> m(vocab_size, 0.0);
  m[hot] = 1.0;
  return Dist(std::move(m));
}

std::size_t Dist::support_size() const {
  return static_cast<std::size_t>(std::count_if(mass_.begin(), mass_.end(), [](double m) { return m > 0.0; }));
}

TokenSet::TokenSet(std::vector<Token> members) : members_(std::move(members)) {
  std::sort(members_.begin(), members_.end());
  members_.erase(std::unique(members_.begin(), members_.end()), members_.end());
}

TokenSet TokenSet::from_mask(std::uint64_t mask) {
  std::vector<Token> m;
  while (mask != 0) {
    m.push_back(static_cast<Token>(std::countr_zero(mask)));
    mask &= mask - 1;
  }
  return TokenSet(std::move(m));
}

bool TokenSet::contains(Token t) const {
  return std::binary_search(members_.begin(), members_.end(), t);
}

void require_same_size(const Dist& a, const Dist& b) {
  if (a.size() != b.size()) {
    throw Error("vocabulary size mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
}

Dist softmax_temp(std::span<const double> logits, double temperature) {
  if (logits.empty()) throw Error("empty distribution");
  if (!(temperature >= 0.0) || !std::isfinite(temperature)) throw Error("temperature must be finite and >= 0");
  for (double l : logits) {
    if (!std::isfinite(l)) throw Error("logits must be finite");
  }
  // max_element returns the first maximum, which is the lowest-index tie-break.
  const auto top = std::max_element(logits.begin(), logits.end());
  if (temperature == 0.0) {
    return Dist::one_hot(logits.size(), static_cast<Token>(top - logits.begin()));
  }
  const double shift = *top;
  std::vector<double> m(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) m[i] = std::exp((logits[i] - shift) / temperature);
  return Dist(std::move(m));
}

Dist residual_dist(const Dist& p, const Dist& q) {
  require_same_size(p, q);
  std::vector<double> r(p.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    r[i] = std::max(p[i] - q[i], 0.0);
    total += r[i];
  }
  if (!(total > 0.0)) return Dist::uniform(p.size());
  return Dist(std::move(r));
}

Dist exclude_renorm(const Dist& q, const TokenSet& excluded) {
  std::vector<double> m = q.vector();
  for (Token t : excluded) {
    if (t >= m.size()) throw Error("exclude_renorm: token out of range");
    m[t] = 0.0;
  }
  double remaining = 0.0;
  for (double v : m) remaining += v;
  if (remaining <= 1e-12) throw Error("exhausted support");
  return Dist(std::move(m));
}

std::vector<Token> top_k_ordered(const Dist& q, std::size_t k) {
  if (k > q.size()) throw Error("top_k: k exceeds vocabulary size");
  std::vector<Token> idx(q.size());
  std::iota(idx.begin(), idx.end(), Token{0});
  auto by_mass = [&](Token a, Token b) { return q[a] > q[b] || (q[a] == q[b] && a < b); };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), by_mass);
  idx.resize(k);
  return idx;
}

TokenSet top_k(const Dist& q, std::size_t k) { return TokenSet(top_k_ordered(q, k)); }

double tv_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("tv_distance: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return 0.5 * s;
}

}  // namespace mdsd
