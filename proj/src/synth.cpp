#include "mdsd/synth.hpp"

#include <algorithm>
#include <cfloat>
#include <charconv>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "mdsd/random.hpp"

namespace mdsd {

namespace {

std::vector<double> zipf_logits(double exponent, std::size_t vocab, RandomStream& rng) {
  std::vector<std::size_t> rank(vocab);
  std::iota(rank.begin(), rank.end(), std::size_t{1});
  std::shuffle(rank.begin(), rank.end(), rng);
  std::vector<double> logits(vocab);
  for (std::size_t i = 0; i < vocab; ++i) logits[i] = -exponent * std::log(static_cast<double>(rank[i]));
  return logits;
}

std::vector<double> dirichlet_logits(double concentration, std::size_t vocab, RandomStream& rng) {
  std::gamma_distribution<double> gamma(concentration, 1.0);
  std::vector<double> logits(vocab);
  // Normalizing gammas gives the Dirichlet sample; its log is a valid logit vector.
  for (double& l : logits) l = std::log(std::max(gamma(rng), DBL_MIN));
  return logits;
}

std::vector<double> draw(const SynthSpec& spec, std::size_t vocab, RandomStream& rng) {
  return spec.kind == SynthKind::Zipf ? zipf_logits(spec.param, vocab, rng) : dirichlet_logits(spec.param, vocab, rng);
}

}  // namespace

SynthSpec SynthSpec::parse(std::string_view text) {
  SynthSpec spec;
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw Error("synthetic generator must look like zipf:<s> or dirichlet:<c>");
  const std::string_view kind = text.substr(0, colon);
  std::string_view rest = text.substr(colon + 1);
  if (kind == "zipf") {
    spec.kind = SynthKind::Zipf;
  } else if (kind == "dirichlet") {
    spec.kind = SynthKind::Dirichlet;
  } else {
    throw Error("unknown synthetic generator: " + std::string(kind));
  }
  constexpr std::string_view kShared = ":shared";
  if (rest.size() > kShared.size() && rest.substr(rest.size() - kShared.size()) == kShared) {
    spec.shared_draft = true;
    rest.remove_suffix(kShared.size());
  }
  const std::string number(rest);
  std::size_t used = 0;
  try {
    spec.param = std::stod(number, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != number.size() || number.empty() || !(spec.param > 0.0) || !std::isfinite(spec.param)) {
    throw Error("synthetic generator parameter must be a positive number: " + number);
  }
  return spec;
}

std::string SynthSpec::to_string() const {
  std::ostringstream os;
  os.precision(17);
  os << (kind == SynthKind::Zipf ? "zipf:" : "dirichlet:") << param << (shared_draft ? ":shared" : "");
  return os.str();
}

LogitsRecord synth_position(const SynthSpec& spec, std::size_t vocab, std::uint64_t seed, std::uint64_t index) {
  if (vocab < 2) throw Error("synthetic vocabulary must have at least 2 tokens");
  RandomStream rng(seed, index);
  LogitsRecord r;
  r.p_logits = draw(spec, vocab, rng);
  r.q_logits = spec.shared_draft ? r.p_logits : draw(spec, vocab, rng);
  return r;
}

std::vector<LogitsRecord> synth_positions(const SynthSpec& spec, std::size_t vocab, std::size_t count,
                                          std::uint64_t seed) {
  std::vector<LogitsRecord> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(synth_position(spec, vocab, seed, i));
  return out;
}

}  // namespace mdsd
