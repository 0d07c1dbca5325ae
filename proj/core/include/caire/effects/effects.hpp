#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "caire/train/trainer.hpp"

namespace caire::effects {

/// A fitted model bound for scoring. Holds its own parameter copy, so it is
/// neither copied nor moved.
class EffectModel {
 public:
  explicit EffectModel(const train::FittedModel& fm);
  EffectModel(const EffectModel&) = delete;
  EffectModel& operator=(const EffectModel&) = delete;

  /// Change in mean outcome from replacing an epsilon fraction of every
  /// training repertoire with a_star. Throws LengthError if a_star does not
  /// fit the model's L_max.
  double ate(const seqcore::AminoSequence& a_star, double epsilon) const;
  double ate(const seqcore::TokenizedSequence& a_star, double epsilon) const;

  /// Weighted mean of ate(x, 1) over the repertoire.
  double repertoire_effect(const seqcore::WeightedSet& rep) const;

  const models::CaireModel& model() const noexcept { return model_; }
  const train::CohortSummary& summary() const noexcept { return summary_; }

 private:
  double ate_from_embedding(const std::vector<double>& h, double epsilon) const;

  ndiff::ParamStore params_;
  models::CaireModel model_;
  train::CohortSummary summary_;
};

struct EffectEstimate {
  seqcore::AminoSequence sequence;
  double epsilon = 0.1;
  double ate = 0.0;  // ensemble mean
  std::vector<double> per_model;
  double mu_hat = 0.0;
  double sigma_hat = 0.0;
  double p_tilde = 0.5;
  /// Set for rows that could not be scored; `input` then keeps the raw text.
  std::string input;
  std::string error;
};

/// mu = mean, sigma = sample sd (K - 1), p = Phi(-|mu| / sigma). With
/// sigma = 0: p = 0 if mu != 0, else 0.5. Throws Error for fewer than 2 values.
struct SignStats {
  double mu_hat = 0.0;
  double sigma_hat = 0.0;
  double p_tilde = 0.5;
};
SignStats sign_stats(std::span<const double> per_model);

EffectEstimate ensemble_ate(std::span<const std::unique_ptr<EffectModel>> ensemble,
                            const seqcore::AminoSequence& a_star, double epsilon = 0.1);

struct EffectSpread {
  double between_sd = 0.0;
  double within_sd = 0.0;
};
/// between: population sd across patients of each patient's mean effect.
/// within: sqrt of the mean across patients of the weighted within-patient
/// variance. Together between^2 + within^2 is the variance of the effect of a
/// sequence drawn by picking a patient uniformly, then a sequence by weight.
EffectSpread effect_decomposition(const EffectModel& model, std::span<const seqcore::WeightedSet> repertoires);

/// Columns: sequence, ate, mu_hat, sigma_hat, p_tilde, error.
void write_effects_csv(std::span<const EffectEstimate> estimates, const std::filesystem::path& path);

}  // namespace caire::effects
