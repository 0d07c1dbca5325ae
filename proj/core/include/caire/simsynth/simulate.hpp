#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "caire/seqcore/repertoire.hpp"
#include "caire/simsynth/motif.hpp"

namespace caire::simsynth {

/// Source of pre-injection sequences (the unperturbed pre-selection repertoire).
class BaseSampler {
 public:
  virtual ~BaseSampler() = default;
  virtual AminoSequence draw(seqcore::Rng& rng) const = 0;
  /// Sequences whose 3-mer counts rank candidate motifs.
  virtual std::vector<AminoSequence> reference_corpus(seqcore::Rng& rng) const = 0;
  virtual std::string describe() const = 0;
};

/// Uniform resampling with replacement from a fixed corpus.
class CorpusSampler final : public BaseSampler {
 public:
  /// Throws Error if the corpus is empty.
  explicit CorpusSampler(std::vector<AminoSequence> corpus);
  /// Reads one sequence per line; invalid lines raise ParseError.
  static CorpusSampler from_file(const std::filesystem::path& path);

  AminoSequence draw(seqcore::Rng& rng) const override;
  std::vector<AminoSequence> reference_corpus(seqcore::Rng& rng) const override;
  std::string describe() const override;

 private:
  std::vector<AminoSequence> corpus_;
};

/// Length uniform on [min_length, max_length], residues i.i.d. from
/// background amino-acid frequencies (kAlphabet order).
class SyntheticSampler final : public BaseSampler {
 public:
  SyntheticSampler(std::size_t min_length = 8, std::size_t max_length = 18);

  AminoSequence draw(seqcore::Rng& rng) const override;
  std::vector<AminoSequence> reference_corpus(seqcore::Rng& rng) const override;
  std::string describe() const override;

  static const std::array<double, seqcore::kNumResidues>& background_frequencies();

 private:
  std::size_t min_length_, max_length_;
  std::array<double, seqcore::kNumResidues> cumulative_{};
};

/// Weighted empirical distribution over the pool: weight_j = r(pool_j) / sum r.
/// Throws Error if the pool is empty or any fitness is not positive and finite.
seqcore::WeightedSet apply_selection(std::vector<AminoSequence> pool,
                                     const std::function<double(const AminoSequence&)>& fitness);

struct SimConfig {
  std::size_t n_patients = 240;
  std::size_t m_mature = 2000;
  std::size_t m_pool = 0;  // 0 means 2 * m_mature
  std::size_t b_preselect = 2000;
  double eta = 0.01;
  double p_zeta = 0.4;
  double p_u = 0.4;
  double fitness_u = 6.0;      // log-fitness of the confounded motif is fitness_u * u + fitness_base
  double fitness_base = -5.0;
  double gamma_a = 0.4;
  double gamma_u = 2.0;
  double gamma_0 = 0.0;
  double tau_y = 0.1;
  std::size_t motif_position = 3;
  std::uint64_t seed = 0;

  std::size_t pool_size() const noexcept { return m_pool == 0 ? 2 * m_mature : m_pool; }
  /// Throws ConfigError on out-of-range settings.
  void validate() const;
};

struct PatientTruth {
  std::string patient_id;
  bool zeta = false;
  bool u = false;
  /// Selected-distribution mass of sequences carrying the causal motif.
  double causal_mass = 0.0;
  /// Injected draws across the pre-selection sample and the selection pool.
  std::size_t injected_causal = 0;
  std::size_t injected_confounded = 0;
};

struct GroundTruth {
  MotifSpec causal;
  MotifSpec confounded;
  double eta = 0.0;
  std::uint64_t seed = 0;
  std::vector<PatientTruth> patients;
  /// Fraction of sequences (both compartments) of zeta = 0 patients that carry
  /// the causal motif without having been injected.
  double causal_coincidence_rate = 0.0;
  std::vector<std::string> warnings;

  const PatientTruth* find(const std::string& patient_id) const noexcept;
};

/// D(x; kappa_cau) for every mature sequence of `rep`, in order.
std::vector<int> causal_labels(const seqcore::Repertoire& rep, const GroundTruth& truth);

struct SimResult {
  seqcore::CohortDataset dataset;
  GroundTruth truth;
};

/// Builds the confounded cohort. Patients are simulated on independent
/// streams split from `rng`, so the result does not depend on evaluation order.
/// Splits are assigned with SplitConfig{seed = cfg.seed}.
SimResult simulate_cohort(const SimConfig& cfg, const BaseSampler& sampler, seqcore::Rng rng);

/// Draws from q_z for one patient: base draw, confounded injection with
/// probability eta, causal injection with probability eta * zeta. Short base
/// draws are redrawn for injection, at most 1000 times.
enum class Injection { kNone, kConfounded, kCausal };
AminoSequence draw_preselection(const BaseSampler& sampler, const MotifSpec& causal, const MotifSpec& confounded,
                                double eta, bool zeta, seqcore::Rng& rng, Injection* injected = nullptr);

std::string patient_name(std::size_t index);

void write_ground_truth(const GroundTruth& truth, const std::filesystem::path& csv_path,
                        const std::filesystem::path& motif_json_path);
/// Reads both files; throws ParseError on malformed input.
GroundTruth read_ground_truth(const std::filesystem::path& csv_path, const std::filesystem::path& motif_json_path);

}  // namespace caire::simsynth
