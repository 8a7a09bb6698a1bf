#include "mdsd/draft.hpp"

#include <algorithm>
#include <cmath>

namespace mdsd {

namespace {

// Tail distribution for schemes with deterministic leading drafts. Falls back
// to uniform over the non-top tokens when the top tokens hold all of q.
Dist tail_after(const Dist& q, const std::vector<Token>& top) {
  const TokenSet excluded(top);
  try {
    return exclude_renorm(q, excluded);
  } catch (const Error&) {
    std::vector<double> m(q.size(), 1.0);
    for (Token t : top) m[t] = 0.0;
    return Dist(std::move(m));
  }
}

constexpr int kMaxRejections = 64;

}  // namespace

std::string_view to_string(SchemeKind kind) {
  switch (kind) {
    case SchemeKind::WithReplacement: return "with_replacement";
    case SchemeKind::WithoutReplacement: return "without_replacement";
    case SchemeKind::Product: return "product";
    case SchemeKind::Greedy: return "greedy";
    case SchemeKind::SpecHub: return "spechub";
  }
  return "unknown";
}

DraftScheme::DraftScheme(SchemeKind kind, Dist q, std::size_t n)
    : kind_(kind), q_(std::move(q)), n_(n), tail_(Dist::uniform(1)) {
  if (n_ == 0) throw Error("draft count must be positive");
}

DraftScheme DraftScheme::with_replacement(Dist q, std::size_t n) {
  DraftScheme s(SchemeKind::WithReplacement, std::move(q), n);
  s.samplers_.emplace_back(s.q_);
  return s;
}

DraftScheme DraftScheme::without_replacement(Dist q, std::size_t n) {
  if (n > q.support_size()) {
    throw Error("without-replacement scheme needs n <= number of tokens with q > 0");
  }
  DraftScheme s(SchemeKind::WithoutReplacement, std::move(q), n);
  s.samplers_.emplace_back(s.q_);
  return s;
}

DraftScheme DraftScheme::product(std::vector<Dist> factors) {
  if (factors.empty()) throw Error("product scheme needs at least one factor");
  for (const Dist& f : factors) require_same_size(f, factors.front());
  DraftScheme s(SchemeKind::Product, factors.front(), factors.size());
  for (const Dist& f : factors) s.samplers_.emplace_back(f);
  s.factors_ = std::move(factors);
  return s;
}

DraftScheme DraftScheme::greedy(Dist q, std::size_t n) {
  if (n > q.size()) throw Error("greedy scheme needs n <= vocabulary size");
  DraftScheme s(SchemeKind::Greedy, std::move(q), n);
  s.top_ = top_k_ordered(s.q_, n - 1);
  s.tail_ = tail_after(s.q_, s.top_);
  s.tail_sampler_ = CategoricalSampler(s.tail_);
  return s;
}

DraftScheme DraftScheme::spechub(Dist q) {
  if (q.size() < 2) throw Error("spechub scheme needs a vocabulary of at least 2 tokens");
  DraftScheme s(SchemeKind::SpecHub, std::move(q), 2);
  s.top_ = top_k_ordered(s.q_, 1);
  s.tail_ = tail_after(s.q_, s.top_);
  s.samplers_.emplace_back(s.q_);
  s.tail_sampler_ = CategoricalSampler(s.tail_);
  return s;
}

DraftTuple DraftScheme::sample(RandomStream& rng) const {
  DraftTuple t;
  t.reserve(n_);
  switch (kind_) {
    case SchemeKind::WithReplacement:
      for (std::size_t j = 0; j < n_; ++j) t.push_back(samplers_[0](rng));
      break;
    case SchemeKind::WithoutReplacement: {
      // Redrawing from q until an unused token appears is exactly a draw
      // from the exclusion-renormalized distribution.
      std::vector<char> used(q_.size(), 0);
      for (std::size_t j = 0; j < n_; ++j) {
        Token x = samplers_[0](rng);
        int tries = 1;
        while (used[x] && tries < kMaxRejections) {
          x = samplers_[0](rng);
          ++tries;
        }
        if (used[x]) {
          x = sample_index(exclude_renorm(q_, TokenSet(t)).mass(), rng.uniform());
        }
        used[x] = 1;
        t.push_back(x);
      }
      break;
    }
    case SchemeKind::Product:
      for (const auto& s : samplers_) t.push_back(s(rng));
      break;
    case SchemeKind::Greedy:
      t = top_;
      t.push_back(tail_sampler_(rng));
      break;
    case SchemeKind::SpecHub: {
      const Token first = samplers_[0](rng);
      t.push_back(first);
      t.push_back(first == top_[0] ? tail_sampler_(rng) : top_[0]);
      break;
    }
  }
  return t;
}

DraftTuple sample_tuple(const DraftScheme& scheme, RandomStream& rng) { return scheme.sample(rng); }

double tuple_prob(const DraftScheme& scheme, std::span<const Token> t) {
  const std::size_t n = scheme.num_drafts();
  const std::size_t vocab = scheme.vocab_size();
  if (t.size() != n) throw Error("tuple length does not match draft count");
  for (Token x : t) {
    if (x >= vocab) throw Error("tuple token out of range");
  }
  const Dist& q = scheme.q();
  switch (scheme.kind()) {
    case SchemeKind::WithReplacement: {
      double prob = 1.0;
      for (Token x : t) prob *= q[x];
      return prob;
    }
    case SchemeKind::WithoutReplacement: {
      double prob = 1.0;
      double used = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (std::find(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(j), t[j]) != t.begin() + static_cast<std::ptrdiff_t>(j)) {
          return 0.0;
        }
        const double remaining = 1.0 - used;
        if (remaining <= 1e-12) return 0.0;
        prob *= q[t[j]] / remaining;
        used += q[t[j]];
      }
      return prob;
    }
    case SchemeKind::Product: {
      double prob = 1.0;
      for (std::size_t j = 0; j < n; ++j) prob *= scheme.factors()[j][t[j]];
      return prob;
    }
    case SchemeKind::Greedy: {
      if (!std::equal(scheme.top().begin(), scheme.top().end(), t.begin())) return 0.0;
      return scheme.tail()[t[n - 1]];
    }
    case SchemeKind::SpecHub: {
      const Token top = scheme.top()[0];
      if (t[0] != top && t[1] == top) return q[t[0]];
      if (t[0] == top && t[1] != top) return q[top] * scheme.tail()[t[1]];
      return 0.0;
    }
  }
  return 0.0;
}

void for_each_tuple(std::size_t vocab_size, std::size_t n, const std::function<void(std::span<const Token>)>& fn) {
  if (vocab_size == 0) return;
  std::vector<Token> t(n, 0);
  while (true) {
    fn(t);
    std::size_t j = n;
    while (j > 0) {
      --j;
      if (++t[j] < vocab_size) break;
      t[j] = 0;
      if (j == 0) return;
    }
    if (n == 0) return;
  }
}

std::vector<double> elementary_symmetric(std::span<const double> values, std::size_t n) {
  std::vector<double> e(n + 1, 0.0);
  e[0] = 1.0;
  for (double v : values) {
    for (std::size_t k = n; k >= 1; --k) e[k] += v * e[k - 1];
  }
  return e;
}

PrefixQEvaluator::PrefixQEvaluator(const DraftScheme& scheme)
    : kind_(scheme.kind()), n_(scheme.num_drafts()) {
  switch (kind_) {
    case SchemeKind::Product:
      throw Error("no fast Q; use oracle");
    case SchemeKind::WithReplacement:
      q_ = scheme.q().vector();
      break;
    case SchemeKind::WithoutReplacement:
      q_ = scheme.q().vector();
      full_coeff_ = elementary_symmetric(q_, n_)[n_];
      break;
    case SchemeKind::Greedy:
    case SchemeKind::SpecHub:
      q_ = scheme.tail().vector();
      is_top_.assign(q_.size(), 0);
      for (Token t : scheme.top()) is_top_[t] = 1;
      num_top_ = scheme.top().size();
      break;
  }
  reset();
}

void PrefixQEvaluator::reset() {
  mass_ = 0.0;
  tops_added_ = 0;
  if (kind_ == SchemeKind::WithoutReplacement) {
    coeffs_.assign(n_ + 1, 0.0);
    coeffs_[0] = 1.0;
  }
}

void PrefixQEvaluator::add(Token x) {
  switch (kind_) {
    case SchemeKind::WithReplacement:
      mass_ += q_[x];
      break;
    case SchemeKind::WithoutReplacement:
      for (std::size_t k = n_; k >= 1; --k) coeffs_[k] += q_[x] * coeffs_[k - 1];
      break;
    case SchemeKind::Greedy:
    case SchemeKind::SpecHub:
      if (is_top_[x]) {
        ++tops_added_;
      } else {
        mass_ += q_[x];
      }
      break;
    case SchemeKind::Product:
      break;
  }
}

double PrefixQEvaluator::value() const {
  switch (kind_) {
    case SchemeKind::WithReplacement:
      return std::pow(mass_, static_cast<double>(n_));
    case SchemeKind::WithoutReplacement:
      return coeffs_[n_] / full_coeff_;
    case SchemeKind::Greedy:
    case SchemeKind::SpecHub:
      return tops_added_ == num_top_ ? mass_ : 0.0;
    case SchemeKind::Product:
      break;
  }
  return 0.0;
}

PrefixQEvaluator make_prefix_q(const DraftScheme& scheme) { return PrefixQEvaluator(scheme); }

}  // namespace mdsd
