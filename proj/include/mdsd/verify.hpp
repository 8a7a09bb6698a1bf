#pragma once

#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "mdsd/draft.hpp"
#include "mdsd/prob.hpp"
#include "mdsd/random.hpp"

namespace mdsd {

enum class Method { OtSingle, RrsWith, RrsWithout, Kseq, Greedy };

std::string_view to_string(Method method);

/**
 * A verification rule pi(i | drafts): sample() draws the output token, and
 * conditional() returns the full output law for enumeration-based checks.
 * Kernels are immutable after construction and safe to share across threads.
 */
class VerifierKernel {
 public:
  virtual ~VerifierKernel() = default;

  virtual std::string_view name() const = 0;
  virtual Token sample(std::span<const Token> drafts, RandomStream& rng) const = 0;
  virtual std::vector<double> conditional(std::span<const Token> drafts) const = 0;
};

/// Fixed point of the K-SEQ acceptance threshold.
struct KseqParams {
  double rho = 1.0;
  double beta_at_rho = 1.0;
  double alpha_closed = 1.0;
  /// 1 - (1 - beta)^n - rho * beta at the returned rho.
  double residual = 0.0;
  std::size_t num_drafts = 1;
};

/// beta(rho) = sum_i min(p(i) / rho, q(i)).
double kseq_beta(const Dist& p, const Dist& q, double rho);

/// Solves 1 - (1 - beta(rho))^n = rho * beta(rho) for rho >= 1 by bracketing and bisection.
KseqParams kseq_solve(const Dist& p, const Dist& q, std::size_t n);

/// Builds the kernel of `method` for drafts from `scheme`. Throws on pairs
/// that are not target-preserving (e.g. Greedy verification of iid drafts).
std::unique_ptr<VerifierKernel> make_kernel(Method method, const Dist& p, const DraftScheme& scheme);

/// True when make_kernel(method, p, scheme) accepts the pair.
bool compatible(Method method, const DraftScheme& scheme);

Token ot_single_verify(const Dist& p, const Dist& q, Token draft, RandomStream& rng);
Token rrs_w_verify(const Dist& p, const Dist& q, std::span<const Token> drafts, RandomStream& rng);
Token rrs_wo_verify(const Dist& p, const Dist& q, std::span<const Token> drafts, RandomStream& rng);
Token kseq_verify(const Dist& p, const Dist& q, const KseqParams& params, std::span<const Token> drafts, RandomStream& rng);
Token greedy_verify(const Dist& p, const Dist& q, std::size_t n, std::span<const Token> drafts, RandomStream& rng);

/// Exact acceptance rate of RRS with iid drafts; the residual chain does not depend on the drafts.
double rrs_w_rate_exact(const Dist& p, const Dist& q, std::size_t n);

// Concrete kernels.

class OtSingleKernel final : public VerifierKernel {
 public:
  OtSingleKernel(const Dist& p, const Dist& q);
  std::string_view name() const override { return "ot"; }
  Token sample(std::span<const Token> drafts, RandomStream& rng) const override;
  std::vector<double> conditional(std::span<const Token> drafts) const override;

  Token verify(Token draft, RandomStream& rng) const;
  std::vector<double> conditional(Token draft) const;

 private:
  double accept_prob(Token draft) const;

  Dist p_;
  Dist q_;
  Dist residual_;
  CategoricalSampler residual_sampler_;
};

class RrsWithKernel final : public VerifierKernel {
 public:
  RrsWithKernel(const Dist& p, const Dist& q, std::size_t n);
  std::string_view name() const override { return "rrs-w"; }
  Token sample(std::span<const Token> drafts, RandomStream& rng) const override;
  std::vector<double> conditional(std::span<const Token> drafts) const override;

 private:
  Dist q_;
  std::vector<Dist> chain_;  // running targets r_1 = p, r_{k+1} = Res(r_k - q)
  std::vector<CategoricalSampler> chain_samplers_;
};

class RrsWithoutKernel final : public VerifierKernel {
 public:
  RrsWithoutKernel(const Dist& p, const Dist& q);
  std::string_view name() const override { return "rrs-wo"; }
  Token sample(std::span<const Token> drafts, RandomStream& rng) const override;
  std::vector<double> conditional(std::span<const Token> drafts) const override;

 private:
  Dist p_;
  Dist q_;
};

class KseqKernel final : public VerifierKernel {
 public:
  KseqKernel(const Dist& p, const Dist& q, std::size_t n);
  KseqKernel(const Dist& p, const Dist& q, const KseqParams& params);
  std::string_view name() const override { return "kseq"; }
  Token sample(std::span<const Token> drafts, RandomStream& rng) const override;
  std::vector<double> conditional(std::span<const Token> drafts) const override;

  const KseqParams& params() const { return params_; }
  const Dist& fallback() const { return fallback_; }

 private:
  double accept_prob(Token draft) const;

  Dist p_;
  Dist q_;
  KseqParams params_;
  Dist fallback_;
  CategoricalSampler fallback_sampler_;
};

class GreedyKernel final : public VerifierKernel {
 public:
  GreedyKernel(const Dist& p, const DraftScheme& greedy_scheme);
  std::string_view name() const override { return "greedy"; }
  Token sample(std::span<const Token> drafts, RandomStream& rng) const override;
  std::vector<double> conditional(std::span<const Token> drafts) const override;

 private:
  void check_prefix(std::span<const Token> drafts) const;

  std::vector<Token> top_;
  OtSingleKernel last_;
};

}  // namespace mdsd
