#include "mdsd/random.hpp"

#include <algorithm>

namespace mdsd {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

std::uint64_t splitmix_finalize(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return splitmix_finalize(splitmix_finalize(a + kGolden) ^ (b * 0xd1b54a32d192ed03ULL + kGolden));
}

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream_id) : state_(mix_seed(seed, stream_id)) {}

RandomStream::result_type RandomStream::operator()() {
  state_ += kGolden;
  return splitmix_finalize(state_);
}

Token sample_index(std::span<const double> mass, double u) {
  double acc = 0.0;
  Token last = 0;
  for (Token i = 0; i < mass.size(); ++i) {
    if (mass[i] <= 0.0) continue;
    acc += mass[i];
    last = i;
    if (u < acc) return i;
  }
  // Rounding left u above the accumulated total; fall back to the last supported token.
  return last;
}

CategoricalSampler::CategoricalSampler(const Dist& dist) : cdf_(dist.size()) {
  double acc = 0.0;
  for (Token i = 0; i < dist.size(); ++i) {
    acc += dist[i];
    cdf_[i] = acc;
    if (dist[i] > 0.0) last_positive_ = i;
  }
}

Token CategoricalSampler::operator()(RandomStream& rng) const {
  const double u = rng.uniform() * cdf_.back();
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  if (it == cdf_.end()) return last_positive_;
  return static_cast<Token>(it - cdf_.begin());
}

}  // namespace mdsd
