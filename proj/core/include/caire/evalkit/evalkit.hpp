#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "caire/effects/effects.hpp"
#include "caire/seqcore/repertoire.hpp"
#include "caire/simsynth/simulate.hpp"

namespace caire::evalkit {

/// Exact distributions over a small sequence space.
struct TinyWorld {
  std::vector<double> q_z;
  std::vector<double> q_a;
  std::vector<double> r;
};

/// Random world with `size` elements: Dirichlet(1) q_z, log-normal r and the
/// implied q_a.
TinyWorld random_tiny_world(std::size_t size, seqcore::Rng& rng);

/// q_a(x) = r(x) q_z(x) / sum r q_z.
std::vector<double> oracle_select(std::span<const double> q_z, std::span<const double> r);
/// r(x) = (q_a(x) / q_z(x)) / (q_a(x0) / q_z(x0)); entries where both are 0
/// are set to 0. Throws Error if q_z(x0) or q_a(x0) is 0, or q_a > 0 where
/// q_z = 0.
std::vector<double> oracle_fitness(std::span<const double> q_z, std::span<const double> q_a, std::size_t x0);
/// q_z(x) = q_a(x) / r(x) normalised. Throws Error on a non-positive fitness.
std::vector<double> oracle_reverse(std::span<const double> q_a_star, std::span<const double> r);

/// Average precision with right-step interpolation: sum over distinct score
/// thresholds of (recall gain) x (precision at that threshold). Tied scores
/// form one threshold. Throws Error without both classes.
double pr_auc(std::span<const double> scores, std::span<const int> labels);

struct AucResult {
  double auc = 0.0;
  /// 1 / (2 sqrt(min(n_pos, n_unlabeled))).
  double std_error = 0.0;
  std::size_t n_pos = 0, n_unlabeled = 0;
};
/// Mann-Whitney AUC, tied pairs counting one half.
AucResult roc_auc_unlabeled(std::span<const double> scores_pos, std::span<const double> scores_unlabeled);

/// Two-sided permutation test on Welch's t. p = (b + 1) / (n_perm + 1) where b
/// counts permutations with |t| >= |t_observed|. Groups need 2+ members each.
double permutation_ttest(std::span<const double> group_a, std::span<const double> group_b, std::size_t n_perm,
                         seqcore::Rng& rng);
double welch_t(std::span<const double> a, std::span<const double> b);

/// Score for sequence j of a patient's mature repertoire.
using SequenceScorer = std::function<double(const seqcore::WeightedSet& mature, std::size_t j)>;

struct MotifPrAuc {
  double mean = 0.0;
  double std_error = 0.0;  // sd / sqrt(n) across patients
  std::vector<std::string> patients;
  std::vector<double> per_patient;
  std::vector<std::string> warnings;
};

/// Mean PR-AUC over held-out patients with zeta = 1: every mature sequence is
/// scored and labelled by the causal motif. Patients without a labelled
/// sequence are skipped with a warning. Throws Error if no patient remains.
MotifPrAuc per_patient_motif_prauc(std::span<const seqcore::Repertoire* const> heldout,
                                   const simsynth::GroundTruth& truth, const SequenceScorer& scorer);
MotifPrAuc per_patient_motif_prauc(std::span<const seqcore::Repertoire* const> heldout,
                                   const simsynth::GroundTruth& truth, const effects::EffectModel& model,
                                   double epsilon = 0.01);

struct MetricRow {
  std::string metric;
  double value = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
};
/// Columns: metric, value, stderr, n.
void write_metrics_csv(std::span<const MetricRow> rows, const std::filesystem::path& path);

}  // namespace caire::evalkit
