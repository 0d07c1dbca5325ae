#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "caire/models/caire_model.hpp"
#include "caire/ndiff/amsgrad.hpp"
#include "caire/ndiff/checkpoint.hpp"
#include "caire/seqcore/repertoire.hpp"
#include "caire/train/config.hpp"

namespace caire::train {

struct EvalRecord {
  std::size_t step = 0;
  double loss = 0.0;
  double val_score = 0.0;
  double accuracy = 0.0;  // NaN for variants without a classifier
  double r2 = 0.0;
};

/// Training-cohort quantities the effect estimates need.
struct CohortSummary {
  /// (1/n) sum_i E_{q_i}[h_a], over the training patients.
  std::vector<double> mean_embedding;
  std::size_t n_patients = 0;
  /// Attention variants only: per patient E[h_a g] / E[g] and log E[g].
  std::vector<std::vector<double>> attention_embeddings;
  std::vector<double> attention_log_mean_g;
};

CohortSummary summarize_cohort(const models::CaireModel& model, const seqcore::CohortDataset& data,
                               std::span<const std::size_t> patients);

struct FittedModel {
  models::ModelConfig model;
  TrainConfig train;
  ndiff::ParamStore params;  // best validation snapshot
  std::vector<EvalRecord> log;
  double best_score = -std::numeric_limits<double>::infinity();
  std::size_t best_step = 0;
  CohortSummary summary;
  std::vector<std::string> train_patients;
  std::vector<std::string> validation_patients;
  /// Per training patient (rho, beta) on full repertoires; empty without a fitness model.
  std::vector<models::FitnessRepresentation> train_representations;
};

/// Indices into CohortDataset::repertoires.
struct PatientSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};
/// Train and validation patients as assigned in the dataset.
PatientSplit split_from_dataset(const seqcore::CohortDataset& data);

/// Everything needed to continue a run bit-for-bit.
struct TrainState {
  std::size_t step = 0;
  ndiff::ParamStore params;
  ndiff::AmsGradState main_opt;
  ndiff::AmsGradState propensity_opt;
  std::vector<EvalRecord> log;
  double best_score = -std::numeric_limits<double>::infinity();
  std::size_t best_step = 0;
  ndiff::NamedArrays best_params;
};

ndiff::NamedArrays state_to_arrays(const TrainState& state);
/// `state` must come from Trainer::initial_state() of the same configuration.
void state_from_arrays(TrainState& state, const ndiff::NamedArrays& arrays);

struct ValidationScore {
  double score = 0.0;
  double accuracy = 0.0;
  double r2 = 0.0;
};

/// 1 - SS_res / SS_tot, defined as 0 when the outcomes have no variance.
double r_squared(std::span<const double> y, std::span<const double> prediction);

class Trainer {
 public:
  /// Throws ConfigError if the train or validation split is empty.
  Trainer(const seqcore::CohortDataset& data, PatientSplit split, models::ModelConfig model_cfg, TrainConfig cfg);

  TrainState initial_state() const;
  /// Runs steps until state.step reaches min(until_step, total_steps).
  void run(TrainState& state, std::size_t until_step);
  FittedModel finish(const TrainState& state);

  ValidationScore validation_score(ndiff::ParamStore& params);
  /// Minibatch for step `step` (exposed for the scaling tests).
  std::vector<models::PatientBatch> step_batch(std::size_t step) const;
  double patient_scale() const noexcept;
  models::CaireModel& model() noexcept { return model_; }
  const PatientSplit& split() const noexcept { return split_; }

 private:
  models::PatientBatch patient_batch(const seqcore::Repertoire& rep, seqcore::Rng& rng) const;

  const seqcore::CohortDataset& data_;
  PatientSplit split_;
  TrainConfig cfg_;
  models::CaireModel model_;
  seqcore::Rng rng_;
  std::vector<models::PatientBatch> val_batches_;
};

FittedModel train(const seqcore::CohortDataset& data, const PatientSplit& split, const models::ModelConfig& model_cfg,
                  const TrainConfig& cfg);

void write_training_log(const std::vector<EvalRecord>& log, const std::filesystem::path& path);

/// Checkpoint arrays plus a JSON manifest (variant, dimensions, L_max,
/// encoding, parameter names, training settings, patients).
void save_fitted(const FittedModel& fm, const std::filesystem::path& checkpoint_path,
                 const std::filesystem::path& manifest_path);
FittedModel load_fitted(const std::filesystem::path& checkpoint_path, const std::filesystem::path& manifest_path);

/// Fold of every patient for each repeat, stratified on outcome into 3
/// quantile bins. Strata smaller than `folds` are merged into a neighbour,
/// with a warning each time.
struct FoldPlan {
  std::vector<std::vector<std::size_t>> fold_of;  // [repeat][patient]
  std::vector<std::string> warnings;
};
FoldPlan cv_folds(std::span<const double> outcomes, std::size_t folds, std::size_t repeats, std::uint64_t seed);

/// Picks `count` patients stratified on outcome (3 quantile bins).
std::vector<std::size_t> stratified_pick(std::span<const double> outcomes, std::size_t count, seqcore::Rng& rng);

/// folds x repeats models, each holding one fold out. The rest is split into
/// training and validation patients; seeds derive from cfg.seed.
struct Ensemble {
  std::vector<FittedModel> models;
  std::vector<std::vector<std::size_t>> held_out;  // per model, dataset indices
  std::vector<std::string> warnings;
};
Ensemble train_ensemble(const seqcore::CohortDataset& data, const models::ModelConfig& model_cfg,
                        const TrainConfig& cfg, std::size_t folds = 8, std::size_t repeats = 3);

}  // namespace caire::train
