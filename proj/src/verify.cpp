#include "mdsd/verify.hpp"

#include <algorithm>
#include <cmath>

namespace mdsd {

namespace {

constexpr double kRhoTolerance = 1e-12;
constexpr double kFallbackTolerance = 1e-9;

double checked_ratio(double target, double draft_mass) {
  if (!(draft_mass > 0.0)) throw Error("draft outside support");
  return std::min(target / draft_mass, 1.0);
}

// In-place Res^{r - q}; uniform when r == q.
void residual_inplace(std::vector<double>& r, std::span<const double> q) {
  double total = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    r[i] = std::max(r[i] - q[i], 0.0);
    total += r[i];
  }
  if (total > 0.0) {
    for (double& v : r) v /= total;
  } else {
    std::fill(r.begin(), r.end(), 1.0 / static_cast<double>(r.size()));
  }
}

void exclude_inplace(std::vector<double>& q, Token x) {
  q[x] = 0.0;
  double total = 0.0;
  for (double v : q) total += v;
  if (total <= 1e-12) throw Error("exhausted support");
  for (double& v : q) v /= total;
}

void require_distinct(std::span<const Token> drafts) {
  for (std::size_t j = 0; j < drafts.size(); ++j) {
    for (std::size_t l = 0; l < j; ++l) {
      if (drafts[l] == drafts[j]) throw Error("duplicate draft tokens in a without-replacement tuple");
    }
  }
}

void require_length(std::span<const Token> drafts, std::size_t n) {
  if (drafts.size() != n) throw Error("draft tuple has the wrong length");
}

}  // namespace

std::string_view to_string(Method method) {
  switch (method) {
    case Method::OtSingle: return "ot";
    case Method::RrsWith: return "rrs-w";
    case Method::RrsWithout: return "rrs-wo";
    case Method::Kseq: return "kseq";
    case Method::Greedy: return "greedy";
  }
  return "unknown";
}

// ---------------------------------------------------------------- OT single

OtSingleKernel::OtSingleKernel(const Dist& p, const Dist& q)
    : p_(p), q_(q), residual_(residual_dist(p, q)), residual_sampler_(residual_) {}

double OtSingleKernel::accept_prob(Token draft) const {
  if (draft >= q_.size()) throw Error("draft token out of range");
  return checked_ratio(p_[draft], q_[draft]);
}

Token OtSingleKernel::verify(Token draft, RandomStream& rng) const {
  if (rng.bernoulli(accept_prob(draft))) return draft;
  return residual_sampler_(rng);
}

std::vector<double> OtSingleKernel::conditional(Token draft) const {
  const double a = accept_prob(draft);
  std::vector<double> out(p_.size());
  for (Token i = 0; i < out.size(); ++i) out[i] = (1.0 - a) * residual_[i];
  out[draft] += a;
  return out;
}

Token OtSingleKernel::sample(std::span<const Token> drafts, RandomStream& rng) const {
  require_length(drafts, 1);
  return verify(drafts[0], rng);
}

std::vector<double> OtSingleKernel::conditional(std::span<const Token> drafts) const {
  require_length(drafts, 1);
  return conditional(drafts[0]);
}

// ------------------------------------------------------------ RRS with repl.

RrsWithKernel::RrsWithKernel(const Dist& p, const Dist& q, std::size_t n) : q_(q) {
  require_same_size(p, q);
  chain_.reserve(n + 1);
  chain_.push_back(p);
  for (std::size_t k = 0; k < n; ++k) chain_.push_back(residual_dist(chain_.back(), q_));
  for (const Dist& r : chain_) chain_samplers_.emplace_back(r);
}

Token RrsWithKernel::sample(std::span<const Token> drafts, RandomStream& rng) const {
  require_length(drafts, chain_.size() - 1);
  for (std::size_t k = 0; k < drafts.size(); ++k) {
    const Token j = drafts[k];
    if (j >= q_.size()) throw Error("draft token out of range");
    if (rng.bernoulli(checked_ratio(chain_[k][j], q_[j]))) return j;
  }
  return chain_samplers_.back()(rng);
}

std::vector<double> RrsWithKernel::conditional(std::span<const Token> drafts) const {
  require_length(drafts, chain_.size() - 1);
  std::vector<double> out(q_.size(), 0.0);
  double reach = 1.0;
  for (std::size_t k = 0; k < drafts.size(); ++k) {
    const Token j = drafts[k];
    if (j >= q_.size()) throw Error("draft token out of range");
    const double a = checked_ratio(chain_[k][j], q_[j]);
    out[j] += reach * a;
    reach *= 1.0 - a;
  }
  const Dist& last = chain_.back();
  for (Token i = 0; i < out.size(); ++i) out[i] += reach * last[i];
  return out;
}

// --------------------------------------------------------- RRS without repl.

RrsWithoutKernel::RrsWithoutKernel(const Dist& p, const Dist& q) : p_(p), q_(q) { require_same_size(p, q); }

Token RrsWithoutKernel::sample(std::span<const Token> drafts, RandomStream& rng) const {
  require_distinct(drafts);
  std::vector<double> r = p_.vector();
  std::vector<double> qk = q_.vector();
  for (std::size_t k = 0; k < drafts.size(); ++k) {
    const Token j = drafts[k];
    if (j >= qk.size()) throw Error("draft token out of range");
    if (rng.bernoulli(checked_ratio(r[j], qk[j]))) return j;
    residual_inplace(r, qk);
    if (k + 1 < drafts.size()) exclude_inplace(qk, j);
  }
  return sample_index(r, rng.uniform());
}

std::vector<double> RrsWithoutKernel::conditional(std::span<const Token> drafts) const {
  require_distinct(drafts);
  std::vector<double> out(p_.size(), 0.0);
  std::vector<double> r = p_.vector();
  std::vector<double> qk = q_.vector();
  double reach = 1.0;
  for (std::size_t k = 0; k < drafts.size(); ++k) {
    const Token j = drafts[k];
    if (j >= qk.size()) throw Error("draft token out of range");
    const double a = checked_ratio(r[j], qk[j]);
    out[j] += reach * a;
    reach *= 1.0 - a;
    residual_inplace(r, qk);
    if (k + 1 < drafts.size()) exclude_inplace(qk, j);
  }
  for (Token i = 0; i < out.size(); ++i) out[i] += reach * r[i];
  return out;
}

// -------------------------------------------------------------------- K-SEQ

double kseq_beta(const Dist& p, const Dist& q, double rho) {
  double beta = 0.0;
  for (Token i = 0; i < p.size(); ++i) beta += std::min(p[i] / rho, q[i]);
  return beta;
}

KseqParams kseq_solve(const Dist& p, const Dist& q, std::size_t n) {
  require_same_size(p, q);
  if (n == 0) throw Error("draft count must be positive");
  const double exponent = static_cast<double>(n);
  auto eval = [&](double rho) {
    KseqParams k;
    k.rho = rho;
    k.num_drafts = n;
    k.beta_at_rho = kseq_beta(p, q, rho);
    k.alpha_closed = 1.0 - std::pow(1.0 - k.beta_at_rho, exponent);
    k.residual = k.alpha_closed - rho * k.beta_at_rho;
    return k;
  };

  KseqParams lo = eval(1.0);
  // Disjoint supports: beta vanishes for every rho and nothing is ever accepted.
  if (lo.beta_at_rho <= 0.0 || lo.residual <= kRhoTolerance) return lo;

  // g is non-increasing in rho, g(1) > 0 and g < 0 for large rho.
  KseqParams hi = eval(2.0);
  for (int i = 0; hi.residual > 0.0; ++i) {
    if (i > 1000) throw Error("kseq_solve: failed to bracket the fixed point");
    lo = hi;
    hi = eval(hi.rho * 2.0);
  }
  if (std::abs(hi.residual) <= kRhoTolerance) return hi;

  while (true) {
    const double mid_rho = 0.5 * (lo.rho + hi.rho);
    if (!(mid_rho > lo.rho && mid_rho < hi.rho)) {
      return std::abs(lo.residual) <= std::abs(hi.residual) ? lo : hi;
    }
    const KseqParams mid = eval(mid_rho);
    if (mid.residual == 0.0) return mid;
    (mid.residual > 0.0 ? lo : hi) = mid;
  }
}

namespace {

// Terminal distribution when every draft is rejected:
// (p - min(q, p / rho) * alpha / beta) / (1 - beta)^n.
// Tolerance is applied to the numerator before the division by (1 - beta)^n.
Dist kseq_fallback(const Dist& p, const Dist& q, const KseqParams& k, std::size_t n) {
  const double beta = k.beta_at_rho;
  const double all_rejected = std::pow(1.0 - beta, static_cast<double>(n));
  if (beta <= 0.0 || all_rejected <= 0.0) return p;
  const double scale = k.alpha_closed / beta;
  std::vector<double> num(p.size());
  double total = 0.0;
  for (Token i = 0; i < p.size(); ++i) {
    num[i] = p[i] - std::min(q[i], p[i] / k.rho) * scale;
    if (num[i] < -kFallbackTolerance) {
      throw Error("kseq numerical failure");
    }
    num[i] = std::max(num[i], 0.0);
    total += num[i];
  }
  if (std::abs(total - all_rejected) > kFallbackTolerance) throw Error("kseq numerical failure");
  if (!(total > 0.0)) return p;
  return Dist(std::move(num));
}

}  // namespace

KseqKernel::KseqKernel(const Dist& p, const Dist& q, std::size_t n) : KseqKernel(p, q, kseq_solve(p, q, n)) {}

KseqKernel::KseqKernel(const Dist& p, const Dist& q, const KseqParams& params)
    : p_(p), q_(q), params_(params), fallback_(p) {
  require_same_size(p, q);
  if (params_.num_drafts == 0) throw Error("draft count must be positive");
  fallback_ = kseq_fallback(p_, q_, params_, params_.num_drafts);
  fallback_sampler_ = CategoricalSampler(fallback_);
}

double KseqKernel::accept_prob(Token draft) const {
  if (draft >= q_.size()) throw Error("draft token out of range");
  if (!(q_[draft] > 0.0)) throw Error("draft outside support");
  return std::min(p_[draft] / (params_.rho * q_[draft]), 1.0);
}

Token KseqKernel::sample(std::span<const Token> drafts, RandomStream& rng) const {
  require_length(drafts, params_.num_drafts);
  for (Token j : drafts) {
    if (rng.bernoulli(accept_prob(j))) return j;
  }
  return fallback_sampler_(rng);
}

std::vector<double> KseqKernel::conditional(std::span<const Token> drafts) const {
  require_length(drafts, params_.num_drafts);
  std::vector<double> out(p_.size(), 0.0);
  double reach = 1.0;
  for (Token j : drafts) {
    const double a = accept_prob(j);
    out[j] += reach * a;
    reach *= 1.0 - a;
  }
  for (Token i = 0; i < out.size(); ++i) out[i] += reach * fallback_[i];
  return out;
}

// ------------------------------------------------------------------- Greedy

GreedyKernel::GreedyKernel(const Dist& p, const DraftScheme& scheme)
    : top_(scheme.top()), last_(p, scheme.tail()) {
  if (scheme.kind() != SchemeKind::Greedy) throw Error("greedy verification requires the greedy draft scheme");
}

void GreedyKernel::check_prefix(std::span<const Token> drafts) const {
  require_length(drafts, top_.size() + 1);
  if (!std::equal(top_.begin(), top_.end(), drafts.begin())) {
    throw Error("invalid greedy prefix: leading drafts must be Top_{n-1}(q)");
  }
}

Token GreedyKernel::sample(std::span<const Token> drafts, RandomStream& rng) const {
  check_prefix(drafts);
  return last_.verify(drafts.back(), rng);
}

std::vector<double> GreedyKernel::conditional(std::span<const Token> drafts) const {
  check_prefix(drafts);
  return last_.conditional(drafts.back());
}

// ------------------------------------------------------------ construction

bool compatible(Method method, const DraftScheme& scheme) {
  switch (method) {
    case Method::OtSingle:
      return scheme.num_drafts() == 1 && scheme.kind() != SchemeKind::SpecHub;
    case Method::RrsWith:
    case Method::Kseq:
      return scheme.kind() == SchemeKind::WithReplacement;
    case Method::RrsWithout:
      return scheme.kind() == SchemeKind::WithoutReplacement;
    case Method::Greedy:
      return scheme.kind() == SchemeKind::Greedy;
  }
  return false;
}

std::unique_ptr<VerifierKernel> make_kernel(Method method, const Dist& p, const DraftScheme& scheme) {
  if (p.size() != scheme.vocab_size()) throw Error("vocabulary size mismatch between p and draft scheme");
  if (!compatible(method, scheme)) {
    throw Error("incompatible verifier/scheme pair: " + std::string(to_string(method)) + " on " +
                std::string(to_string(scheme.kind())) + " drafts (n=" + std::to_string(scheme.num_drafts()) + ")");
  }
  switch (method) {
    case Method::OtSingle: return std::make_unique<OtSingleKernel>(p, scheme.q());
    case Method::RrsWith: return std::make_unique<RrsWithKernel>(p, scheme.q(), scheme.num_drafts());
    case Method::RrsWithout: return std::make_unique<RrsWithoutKernel>(p, scheme.q());
    case Method::Kseq: return std::make_unique<KseqKernel>(p, scheme.q(), scheme.num_drafts());
    case Method::Greedy: return std::make_unique<GreedyKernel>(p, scheme);
  }
  throw Error("unknown verification method");
}

// ------------------------------------------------------- one-shot wrappers

Token ot_single_verify(const Dist& p, const Dist& q, Token draft, RandomStream& rng) {
  return OtSingleKernel(p, q).verify(draft, rng);
}

Token rrs_w_verify(const Dist& p, const Dist& q, std::span<const Token> drafts, RandomStream& rng) {
  return RrsWithKernel(p, q, drafts.size()).sample(drafts, rng);
}

Token rrs_wo_verify(const Dist& p, const Dist& q, std::span<const Token> drafts, RandomStream& rng) {
  return RrsWithoutKernel(p, q).sample(drafts, rng);
}

Token kseq_verify(const Dist& p, const Dist& q, const KseqParams& params, std::span<const Token> drafts,
                  RandomStream& rng) {
  return KseqKernel(p, q, params).sample(drafts, rng);
}

Token greedy_verify(const Dist& p, const Dist& q, std::size_t n, std::span<const Token> drafts, RandomStream& rng) {
  return GreedyKernel(p, DraftScheme::greedy(q, n)).sample(drafts, rng);
}

double rrs_w_rate_exact(const Dist& p, const Dist& q, std::size_t n) {
  require_same_size(p, q);
  if (n == 0) throw Error("draft count must be positive");
  std::vector<double> r = p.vector();
  double all_rejected = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    double a = 0.0;
    for (Token i = 0; i < r.size(); ++i) a += std::min(r[i], q[i]);
    all_rejected *= 1.0 - a;
    residual_inplace(r, q.mass());
  }
  return 1.0 - all_rejected;
}

}  // namespace mdsd
