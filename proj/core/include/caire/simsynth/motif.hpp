#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "caire/seqcore/alphabet.hpp"
#include "caire/seqcore/rng.hpp"

namespace caire::simsynth {

using seqcore::AminoSequence;

struct MotifSpec {
  AminoSequence motif;
  std::size_t position = 3;  // 0-based start of the overwritten window
};

/// True iff the motif occurs anywhere in x.
bool detect_motif(const AminoSequence& x, const MotifSpec& kappa) noexcept;

/// Overwrites x[position, position + |motif|) with the motif. Throws Error if
/// x is too short to hold the motif at that position.
AminoSequence inject_motif(const AminoSequence& x, const MotifSpec& kappa);

struct MotifChoice {
  MotifSpec causal;
  MotifSpec confounded;
  double band_low = 10.0;   // percentiles actually used
  double band_high = 20.0;
  std::size_t band_size = 0;
  std::vector<std::string> warnings;
};

/// Draws two distinct 3-mers whose corpus count lies in the [10th, 20th)
/// percentile of counts over all 3-mers present in the corpus. The band widens
/// by one percentile on each side, with a warning, until it holds two 3-mers.
/// Throws Error if the corpus has fewer than 1000 3-mer occurrences or fewer
/// than two distinct 3-mers.
MotifChoice choose_motifs(std::span<const AminoSequence> corpus, seqcore::Rng& rng, std::size_t position = 3);

}  // namespace caire::simsynth
