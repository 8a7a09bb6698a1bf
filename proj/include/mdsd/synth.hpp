#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mdsd/prob.hpp"

namespace mdsd {

enum class SynthKind { Dirichlet, Zipf };

/// Synthetic position generator. Parsed from "zipf:<s>" or "dirichlet:<concentration>",
/// with an optional ":shared" suffix that makes the draft logits equal the target logits.
struct SynthSpec {
  SynthKind kind = SynthKind::Zipf;
  double param = 1.0;
  bool shared_draft = false;

  static SynthSpec parse(std::string_view text);
  std::string to_string() const;
};

/**
 * Logits for one synthetic position. At temperature 1 the softmax of each
 * side is a Zipf(s) law over a random rank permutation, or a symmetric
 * Dirichlet(concentration) sample. p and q are drawn independently unless
 * shared_draft is set. Deterministic in (seed, index).
 */
LogitsRecord synth_position(const SynthSpec& spec, std::size_t vocab, std::uint64_t seed, std::uint64_t index);

std::vector<LogitsRecord> synth_positions(const SynthSpec& spec, std::size_t vocab, std::size_t count,
                                          std::uint64_t seed);

}  // namespace mdsd
