#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mdsd {

using Token = std::size_t;

/// Raised for every contract violation in this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/**
 * A probability vector over a vocabulary.
 *
 * Construction validates the entries (finite, non-negative, positive total)
 * and renormalizes once, so downstream code can rely on the mass summing to
 * one within 1e-9.
 */
class Dist {
 public:
  explicit Dist(std::vector<double> mass);

  static Dist uniform(std::size_t vocab_size);
  static Dist one_hot(std::size_t vocab_size, Token hot);

  std::size_t size() const { return mass_.size(); }
  double operator[](Token i) const { return mass_[i]; }
  std::span<const double> mass() const { return mass_; }
  const std::vector<double>& vector() const { return mass_; }

  /// Number of tokens with strictly positive mass.
  std::size_t support_size() const;

  friend bool operator==(const Dist&, const Dist&) = default;

 private:
  std::vector<double> mass_;
};

/// Raw logits for one position of the target and draft models.
struct LogitsRecord {
  std::vector<double> p_logits;
  std::vector<double> q_logits;
};

/// Sorted, duplicate-free set of token ids.
class TokenSet {
 public:
  TokenSet() = default;
  explicit TokenSet(std::vector<Token> members);

  static TokenSet from_mask(std::uint64_t mask);

  bool contains(Token t) const;
  std::size_t size() const { return members_.size(); }
  bool empty() const { return members_.empty(); }
  std::span<const Token> members() const { return members_; }
  auto begin() const { return members_.begin(); }
  auto end() const { return members_.end(); }

  friend bool operator==(const TokenSet&, const TokenSet&) = default;

 private:
  std::vector<Token> members_;
};

/// Softmax of logits / T. T == 0 yields a one-hot on the argmax (lowest index on ties).
Dist softmax_temp(std::span<const double> logits, double temperature);

/// Normalized positive part of p - q. Uniform when p == q.
Dist residual_dist(const Dist& p, const Dist& q);

/// q with the tokens of `excluded` zeroed and the rest renormalized.
/// Throws "exhausted support" when the remaining mass is <= 1e-12.
Dist exclude_renorm(const Dist& q, const TokenSet& excluded);

/// The k tokens of largest mass, ties broken by lowest id, in descending-mass order.
std::vector<Token> top_k_ordered(const Dist& q, std::size_t k);
TokenSet top_k(const Dist& q, std::size_t k);

double tv_distance(std::span<const double> a, std::span<const double> b);
inline double tv_distance(const Dist& a, const Dist& b) { return tv_distance(a.mass(), b.mass()); }

void require_same_size(const Dist& a, const Dist& b);

}  // namespace mdsd
