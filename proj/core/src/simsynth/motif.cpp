#include "caire/simsynth/motif.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "caire/errors.hpp"

namespace caire::simsynth {

namespace {

constexpr std::size_t kMotifLength = 3;
constexpr std::size_t kMinOccurrences = 1000;

// Linear interpolation between order statistics.
double percentile(const std::vector<double>& sorted, double pct) {
  const double pos = pct / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

bool detect_motif(const AminoSequence& x, const MotifSpec& kappa) noexcept {
  return x.str().find(kappa.motif.str()) != std::string::npos;
}

AminoSequence inject_motif(const AminoSequence& x, const MotifSpec& kappa) {
  const std::size_t k = kappa.motif.length();
  if (x.length() < kappa.position + k)
    throw Error("cannot inject motif " + kappa.motif.str() + " at position " + std::to_string(kappa.position) +
                " into " + x.str() + " (length " + std::to_string(x.length()) + ")");
  std::string s = x.str();
  s.replace(kappa.position, k, kappa.motif.str());
  return AminoSequence(std::move(s));
}

MotifChoice choose_motifs(std::span<const AminoSequence> corpus, seqcore::Rng& rng, std::size_t position) {
  std::map<std::string, std::size_t> counts;
  std::size_t total = 0;
  for (const auto& seq : corpus) {
    const std::string& s = seq.str();
    for (std::size_t i = 0; i + kMotifLength <= s.size(); ++i) {
      ++counts[s.substr(i, kMotifLength)];
      ++total;
    }
  }
  if (total < kMinOccurrences)
    throw Error("motif corpus has " + std::to_string(total) + " 3-mer occurrences; at least " +
                std::to_string(kMinOccurrences) + " are required");
  if (counts.size() < 2) throw Error("motif corpus has fewer than two distinct 3-mers");

  std::vector<double> sorted;
  sorted.reserve(counts.size());
  for (const auto& [kmer, c] : counts) sorted.push_back(static_cast<double>(c));
  std::sort(sorted.begin(), sorted.end());

  MotifChoice choice;
  std::vector<std::string> band;
  double lo = 10.0, hi = 20.0;
  while (true) {
    const double vlo = percentile(sorted, lo);
    const double vhi = percentile(sorted, hi);
    band.clear();
    for (const auto& [kmer, c] : counts) {
      const double v = static_cast<double>(c);
      if (v >= vlo && (v < vhi || (hi >= 100.0 && v <= vhi))) band.push_back(kmer);
    }
    if (band.size() >= 2) break;
    lo = std::max(0.0, lo - 1.0);
    hi = std::min(100.0, hi + 1.0);
    choice.warnings.push_back("3-mer frequency band held " + std::to_string(band.size()) +
                              " motif(s); widened to percentiles [" + std::to_string(static_cast<int>(lo)) + ", " +
                              std::to_string(static_cast<int>(hi)) + ")");
  }
  choice.band_low = lo;
  choice.band_high = hi;
  choice.band_size = band.size();

  const std::size_t first = rng.index(band.size());
  std::size_t second = rng.index(band.size() - 1);
  if (second >= first) ++second;
  choice.causal = MotifSpec{AminoSequence(band[first]), position};
  choice.confounded = MotifSpec{AminoSequence(band[second]), position};
  return choice;
}

}  // namespace caire::simsynth
