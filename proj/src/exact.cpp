#include "mdsd/exact.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <numeric>

#include "mdsd/verify.hpp"

namespace mdsd::exact {

namespace {

std::size_t tuple_count(std::size_t vocab, std::size_t n) {
  std::size_t count = 1;
  for (std::size_t j = 0; j < n; ++j) {
    count *= vocab;
    if (count > kMaxTuples) throw Error("tuple enumeration guard exceeded (vocab^n > 20000)");
  }
  return count;
}

void decode_tuple(std::size_t index, std::size_t vocab, std::vector<Token>& t) {
  for (std::size_t j = t.size(); j > 0; --j) {
    t[j - 1] = index % vocab;
    index /= vocab;
  }
}

std::vector<Token> exact_top(const RationalDist& q, std::size_t k) {
  std::vector<Token> idx(q.size());
  std::iota(idx.begin(), idx.end(), Token{0});
  std::stable_sort(idx.begin(), idx.end(), [&](Token a, Token b) { return q[a] > q[b]; });
  idx.resize(k);
  return idx;
}

std::vector<Rational> exact_tail(const RationalDist& q, const std::vector<Token>& top) {
  std::vector<Rational> tail(q.size());
  Rational top_mass = 0;
  std::vector<char> is_top(q.size(), 0);
  for (Token t : top) {
    top_mass += q[t];
    is_top[t] = 1;
  }
  const Rational rest = 1 - top_mass;
  for (Token i = 0; i < q.size(); ++i) {
    if (is_top[i]) continue;
    tail[i] = rest > 0 ? Rational(q[i] / rest) : Rational(1, static_cast<unsigned long>(q.size() - top.size()));
  }
  return tail;
}

Rational sequential_prob(const RationalDist& q, std::span<const Token> t) {
  Rational prob = 1;
  Rational used = 0;
  for (std::size_t j = 0; j < t.size(); ++j) {
    for (std::size_t l = 0; l < j; ++l) {
      if (t[l] == t[j]) return 0;
    }
    const Rational remaining = 1 - used;
    if (remaining == 0) return 0;
    prob *= q[t[j]] / remaining;
    used += q[t[j]];
  }
  return prob;
}

}  // namespace

RationalDist::RationalDist(std::vector<Rational> mass) : mass_(std::move(mass)) {
  if (mass_.empty()) throw Error("empty distribution");
  Rational total = 0;
  for (auto& m : mass_) {
    m.canonicalize();
    if (m < 0) throw Error("rational distribution entries must be non-negative");
    total += m;
  }
  if (total != 1) throw Error("rational distribution must sum to exactly 1");
}

RationalDist RationalDist::from_counts(std::span<const long> counts) {
  long total = 0;
  for (long c : counts) {
    if (c < 0) throw Error("counts must be non-negative");
    total += c;
  }
  if (total <= 0) throw Error("counts must have a positive total");
  std::vector<Rational> m;
  m.reserve(counts.size());
  for (long c : counts) m.emplace_back(c, total);
  return RationalDist(std::move(m));
}

std::size_t RationalDist::support_size() const {
  return static_cast<std::size_t>(std::count_if(mass_.begin(), mass_.end(), [](const Rational& m) { return m > 0; }));
}

Dist RationalDist::to_dist() const {
  std::vector<double> m;
  m.reserve(mass_.size());
  for (const auto& r : mass_) m.push_back(r.get_d());
  return Dist(std::move(m));
}

DraftScheme ExactScheme::to_float() const {
  switch (kind) {
    case SchemeKind::WithReplacement: return DraftScheme::with_replacement(q().to_dist(), n);
    case SchemeKind::WithoutReplacement: return DraftScheme::without_replacement(q().to_dist(), n);
    case SchemeKind::Greedy: return DraftScheme::greedy(q().to_dist(), n);
    case SchemeKind::SpecHub: return DraftScheme::spechub(q().to_dist());
    case SchemeKind::Product: {
      std::vector<Dist> fs;
      for (const auto& f : factors) fs.push_back(f.to_dist());
      return DraftScheme::product(std::move(fs));
    }
  }
  throw Error("unknown scheme kind");
}

std::vector<Rational> exact_tuple_probs(const ExactScheme& scheme) {
  if (scheme.factors.empty()) throw Error("exact scheme has no draft distribution");
  const std::size_t vocab = scheme.vocab_size();
  const std::size_t n = scheme.n;
  if (scheme.kind == SchemeKind::Product && scheme.factors.size() != n) {
    throw Error("product scheme needs one factor per draft");
  }
  if (scheme.kind == SchemeKind::SpecHub && n != 2) throw Error("spechub scheme requires n = 2");
  if (scheme.kind == SchemeKind::Greedy && n > vocab) throw Error("greedy scheme needs n <= vocabulary size");
  const std::size_t count = tuple_count(vocab, n);
  const RationalDist& q = scheme.q();

  std::vector<Token> top;
  std::vector<Rational> tail;
  if (scheme.kind == SchemeKind::Greedy || scheme.kind == SchemeKind::SpecHub) {
    top = exact_top(q, scheme.kind == SchemeKind::Greedy ? n - 1 : 1);
    tail = exact_tail(q, top);
  }

  std::vector<Rational> probs(count);
  std::vector<Token> t(n);
  for (std::size_t idx = 0; idx < count; ++idx) {
    decode_tuple(idx, vocab, t);
    Rational prob = 1;
    switch (scheme.kind) {
      case SchemeKind::WithReplacement:
        for (Token x : t) prob *= q[x];
        break;
      case SchemeKind::WithoutReplacement:
        prob = sequential_prob(q, t);
        break;
      case SchemeKind::Product:
        for (std::size_t j = 0; j < n; ++j) prob *= scheme.factors[j][t[j]];
        break;
      case SchemeKind::Greedy:
        prob = std::equal(top.begin(), top.end(), t.begin()) ? tail[t[n - 1]] : Rational(0);
        break;
      case SchemeKind::SpecHub:
        if (t[0] != top[0] && t[1] == top[0]) {
          prob = q[t[0]];
        } else if (t[0] == top[0] && t[1] != top[0]) {
          prob = q[top[0]] * tail[t[1]];
        } else {
          prob = 0;
        }
        break;
    }
    probs[idx] = prob;
  }
  return probs;
}

FlowNetwork::FlowNetwork(std::size_t num_nodes) : adj_(num_nodes) {}

void FlowNetwork::add_edge(std::size_t from, std::size_t to, const Rational& capacity) {
  adj_[from].push_back(Edge{to, adj_[to].size(), capacity});
  adj_[to].push_back(Edge{from, adj_[from].size() - 1, Rational(0)});
}

Rational FlowNetwork::max_flow(std::size_t source, std::size_t sink) {
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  Rational total = 0;
  std::vector<std::size_t> parent_node(adj_.size());
  std::vector<std::size_t> parent_edge(adj_.size());
  while (true) {
    std::fill(parent_node.begin(), parent_node.end(), kNone);
    parent_node[source] = source;
    std::deque<std::size_t> frontier{source};
    while (!frontier.empty() && parent_node[sink] == kNone) {
      const std::size_t u = frontier.front();
      frontier.pop_front();
      for (std::size_t e = 0; e < adj_[u].size(); ++e) {
        const Edge& edge = adj_[u][e];
        if (edge.residual > 0 && parent_node[edge.to] == kNone) {
          parent_node[edge.to] = u;
          parent_edge[edge.to] = e;
          frontier.push_back(edge.to);
        }
      }
    }
    if (parent_node[sink] == kNone) return total;

    Rational bottleneck = adj_[parent_node[sink]][parent_edge[sink]].residual;
    for (std::size_t v = sink; v != source; v = parent_node[v]) {
      bottleneck = std::min(bottleneck, adj_[parent_node[v]][parent_edge[v]].residual);
    }
    for (std::size_t v = sink; v != source; v = parent_node[v]) {
      Edge& edge = adj_[parent_node[v]][parent_edge[v]];
      edge.residual -= bottleneck;
      adj_[v][edge.reverse].residual += bottleneck;
    }
    total += bottleneck;
  }
}

Rational alpha_maxflow(const RationalDist& p, const ExactScheme& scheme, std::span<const std::size_t> tuple_order) {
  const std::size_t vocab = scheme.vocab_size();
  if (p.size() != vocab) throw Error("vocabulary size mismatch between p and draft scheme");
  const std::vector<Rational> probs = exact_tuple_probs(scheme);
  if (!tuple_order.empty() && tuple_order.size() != probs.size()) {
    throw Error("tuple_order must be a permutation of all tuples");
  }

  // Node layout: source, tokens, tuples with positive mass, sink.
  std::vector<std::size_t> tuples;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    const std::size_t idx = tuple_order.empty() ? k : tuple_order[k];
    if (probs.at(idx) > 0) tuples.push_back(idx);
  }
  const std::size_t source = 0;
  const std::size_t sink = 1 + vocab + tuples.size();
  FlowNetwork net(sink + 1);
  for (Token i = 0; i < vocab; ++i) {
    if (p[i] > 0) net.add_edge(source, 1 + i, p[i]);
  }
  // Token-to-tuple edges are uncapacitated; total flow never exceeds 1.
  const Rational unbounded = 1;
  std::vector<Token> t(scheme.n);
  for (std::size_t k = 0; k < tuples.size(); ++k) {
    const std::size_t node = 1 + vocab + k;
    decode_tuple(tuples[k], vocab, t);
    std::vector<Token> distinct = t;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    for (Token x : distinct) net.add_edge(1 + x, node, unbounded);
    net.add_edge(node, sink, probs[tuples[k]]);
  }
  return net.max_flow(source, sink);
}

Rational q_sequential_exact(const RationalDist& q, const TokenSet& subset, std::size_t n) {
  if (subset.size() > 10 || n > 4) throw Error("q_sequential_exact: enumeration guard exceeded (|H| <= 10, n <= 4)");
  if (n > q.support_size()) throw Error("q_sequential_exact: n exceeds the support of q");
  const std::vector<Token> members(subset.begin(), subset.end());
  if (members.empty()) return n == 0 ? Rational(1) : Rational(0);
  Rational total = 0;
  std::vector<std::size_t> pick(n, 0);
  std::vector<Token> t(n);
  while (true) {
    for (std::size_t j = 0; j < n; ++j) t[j] = members[pick[j]];
    total += sequential_prob(q, t);
    std::size_t j = n;
    while (j > 0) {
      --j;
      if (++pick[j] < members.size()) break;
      pick[j] = 0;
      if (j == 0) return total;
    }
    if (n == 0) return total;
  }
}

std::vector<Rational> exact_subset_mass(const ExactScheme& scheme) {
  const std::size_t vocab = scheme.vocab_size();
  if (vocab > kBruteForceMaxVocab) throw Error("exact_subset_mass: vocabulary too large (max 20)");
  const std::vector<Rational> probs = exact_tuple_probs(scheme);
  std::vector<Rational> table(std::size_t{1} << vocab);
  std::vector<Token> t(scheme.n);
  for (std::size_t idx = 0; idx < probs.size(); ++idx) {
    if (probs[idx] == 0) continue;
    decode_tuple(idx, vocab, t);
    SubsetMask m = 0;
    for (Token x : t) m |= SubsetMask{1} << x;
    table[m] += probs[idx];
  }
  for (std::size_t bit = 0; bit < vocab; ++bit) {
    for (std::size_t h = 0; h < table.size(); ++h) {
      if (h >> bit & 1U) table[h] += table[h ^ (std::size_t{1} << bit)];
    }
  }
  return table;
}

Rational alpha_bruteforce_exact(const RationalDist& p, const std::function<Rational(SubsetMask)>& subset_mass) {
  const std::size_t vocab = p.size();
  if (vocab > kBruteForceMaxVocab) throw Error("alpha_bruteforce_exact: vocabulary too large (max 20)");
  const std::size_t subsets = std::size_t{1} << vocab;
  Rational best = 0;
  for (std::size_t h = 0; h < subsets; ++h) {
    Rational f = 0;
    for (Token i = 0; i < vocab; ++i) {
      if (h >> i & 1U) f += p[i];
    }
    f -= subset_mass(static_cast<SubsetMask>(h));
    if (f < best) best = f;
  }
  return 1 + best;
}

std::vector<double> verifier_marginal_exact(const Dist& p, const DraftScheme& scheme, const VerifierKernel& kernel) {
  if (p.size() != scheme.vocab_size()) throw Error("vocabulary size mismatch between p and draft scheme");
  tuple_count(scheme.vocab_size(), scheme.num_drafts());
  std::vector<double> marginal(p.size(), 0.0);
  for_each_tuple(scheme.vocab_size(), scheme.num_drafts(), [&](std::span<const Token> t) {
    const double prob = tuple_prob(scheme, t);
    if (prob <= 0.0) return;
    const std::vector<double> cond = kernel.conditional(t);
    for (Token i = 0; i < marginal.size(); ++i) marginal[i] += prob * cond[i];
  });
  return marginal;
}

double verifier_acceptance_exact(const DraftScheme& scheme, const VerifierKernel& kernel) {
  tuple_count(scheme.vocab_size(), scheme.num_drafts());
  double accepted = 0.0;
  for_each_tuple(scheme.vocab_size(), scheme.num_drafts(), [&](std::span<const Token> t) {
    const double prob = tuple_prob(scheme, t);
    if (prob <= 0.0) return;
    const std::vector<double> cond = kernel.conditional(t);
    std::vector<Token> distinct(t.begin(), t.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    for (Token x : distinct) accepted += prob * cond[x];
  });
  return accepted;
}

}  // namespace mdsd::exact
