#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "caire/seqcore/alphabet.hpp"
#include "caire/seqcore/encoding.hpp"
#include "caire/seqcore/rng.hpp"

namespace caire::seqcore {

/// A weighted multiset of sequences with weights normalized to one.
/// Token forms are cached so training never re-tokenizes.
class WeightedSet {
 public:
  WeightedSet() = default;
  /// Throws Error if weights are negative, non-finite, or all zero.
  WeightedSet(std::vector<AminoSequence> sequences, std::vector<double> weights);
  /// Uniform weights.
  explicit WeightedSet(std::vector<AminoSequence> sequences);

  std::size_t size() const noexcept { return sequences_.size(); }
  bool empty() const noexcept { return sequences_.empty(); }
  const std::vector<AminoSequence>& sequences() const noexcept { return sequences_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  const std::vector<TokenizedSequence>& tokens() const noexcept { return tokens_; }
  std::size_t max_length() const noexcept;

  /// Index drawn with probability proportional to weight.
  std::size_t draw(Rng& rng) const noexcept;

 private:
  std::vector<AminoSequence> sequences_;
  std::vector<double> weights_;
  std::vector<double> cumulative_;
  std::vector<TokenizedSequence> tokens_;
};

/// One patient: mature repertoire (the treatment), outcome, and samples of the
/// pre-selection repertoire (the instrument).
class Repertoire {
 public:
  Repertoire() = default;
  /// Throws Error if `mature` is empty.
  Repertoire(std::string patient_id, WeightedSet mature, double outcome, WeightedSet preselection = {});

  const std::string& patient_id() const noexcept { return patient_id_; }
  const WeightedSet& mature() const noexcept { return mature_; }
  const WeightedSet& preselection() const noexcept { return preselection_; }
  double outcome() const noexcept { return outcome_; }

 private:
  std::string patient_id_;
  WeightedSet mature_;
  double outcome_ = 0.0;
  WeightedSet preselection_;
};

enum class Split { kTrain, kValidation, kTest };
std::string_view to_string(Split s) noexcept;

struct SplitConfig {
  double val_fraction = 0.125;
  double test_fraction = 0.125;
  std::size_t strata = 3;
  std::uint64_t seed = 0;
};

/// Patients partitioned into train / validation / test.
struct CohortDataset {
  std::vector<Repertoire> repertoires;
  std::map<std::string, Split> split_assignment;

  /// Longest sequence (either compartment) plus one for the end token.
  std::size_t l_max() const noexcept;
  std::vector<const Repertoire*> subset(Split s) const;
  const Repertoire* find(const std::string& patient_id) const noexcept;
};

/// Stratum of each patient: outcome ranks cut into `strata` equal-count bins.
std::vector<std::size_t> outcome_strata(std::span<const double> outcomes, std::size_t strata);

/// Largest-remainder apportionment of `total` across groups of the given sizes.
std::vector<std::size_t> apportion(std::size_t total, std::span<const std::size_t> sizes);

/// Seeded stratified split. Validation and test each get floor(fraction * n)
/// patients; the remainder trains.
std::map<std::string, Split> assign_splits(std::span<const Repertoire> repertoires, const SplitConfig& cfg);

/// k i.i.d. draws (with replacement) from the mature repertoire.
std::vector<AminoSequence> sample_minibatch(const Repertoire& rep, std::size_t k, Rng& rng);
/// Same draw as sample_minibatch, returned as indices into `set`.
std::vector<std::size_t> sample_indices(const WeightedSet& set, std::size_t k, Rng& rng);

}  // namespace caire::seqcore
