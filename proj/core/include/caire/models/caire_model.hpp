#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "caire/models/config.hpp"
#include "caire/models/conv_stage.hpp"
#include "caire/models/mlp.hpp"
#include "caire/ndiff/params.hpp"
#include "caire/seqcore/repertoire.hpp"

namespace caire::models {

struct FitnessRepresentation {
  std::vector<double> rho;
  double beta = 0.0;
};

/// Attention-pooled embedding together with log E_q[g], which the attention
/// ATE needs per patient.
struct AttentionPool {
  std::vector<double> embedding;
  double log_mean_g = 0.0;
};

/// Sequences of one patient in a training minibatch. Mature sequences carry
/// label s = 1 and pre-selection sequences s = 0.
struct PatientBatch {
  std::vector<const seqcore::TokenizedSequence*> mature;
  std::vector<const seqcore::TokenizedSequence*> preselection;
  double outcome = 0.0;
  /// Multiplies the summed classifier log-likelihood of this patient.
  double sequence_scale = 1.0;
};

struct ObjectiveOptions {
  /// Multiplies every patient-level term (n_train / batch_patients).
  double patient_scale = 1.0;
  /// Annealing weight on the priors of rho and beta.
  double xi = 1.0;
};

struct ObjectiveResult {
  double loss = 0.0;
  double classifier_loglik = 0.0;  // unscaled sum over sequences
  double outcome_loglik = 0.0;
  double latent_logprior = 0.0;
  double global_logprior = 0.0;
  std::size_t classifier_correct = 0;
  std::size_t classifier_total = 0;
  std::vector<std::vector<double>> embeddings;
  std::vector<FitnessRepresentation> representations;
  std::vector<double> outcome_means;
};

/// The model family. Parameters live in an external ParamStore; bind() caches
/// lookup tables derived from it and must be repeated after every update.
class CaireModel {
 public:
  explicit CaireModel(ModelConfig cfg);

  const ModelConfig& config() const noexcept { return cfg_; }
  const VariantTraits& variant_traits() const noexcept { return traits_; }

  /// Registers the variant's parameters (zero valued) with their priors.
  void register_params(ndiff::ParamStore& store) const;
  /// Registered and initialised: feature nets uniform fan-in, heads zero,
  /// log tau at the prior median.
  ndiff::ParamStore init_params(seqcore::Rng& rng) const;
  std::vector<std::string> main_param_names() const;
  std::vector<std::string> propensity_param_names() const;
  /// Parameters whose priors enter the main objective.
  std::vector<std::string> main_prior_names() const;

  void bind(ndiff::ParamStore& store);
  ndiff::ParamStore& params() const;

  // Per-sequence features. AminoSequence overloads throw LengthError when the
  // sequence does not fit L_max.
  std::vector<double> h_a(const seqcore::AminoSequence& seq) const;
  void h_a(const seqcore::TokenizedSequence& seq, double* out) const;
  std::vector<double> h_r(const seqcore::AminoSequence& seq) const;
  void h_r(const seqcore::TokenizedSequence& seq, double* out) const;
  /// log g(x) for a given h_a(x).
  double attention_logit(const double* ha) const;

  /// Encoder on weighted sets (weights from the sets) or on uniform batches.
  /// Throws Error if either side is empty.
  FitnessRepresentation encode_patient(const seqcore::WeightedSet& mature, const seqcore::WeightedSet& pre) const;
  FitnessRepresentation encode_patient(std::span<const seqcore::TokenizedSequence* const> mature,
                                       std::span<const seqcore::TokenizedSequence* const> pre) const;
  double classifier_logit(const seqcore::TokenizedSequence& seq, const FitnessRepresentation& rep) const;
  double classifier_loglik(const seqcore::TokenizedSequence& seq, int s, const FitnessRepresentation& rep) const;
  /// exp(rho^T (h_r(x) - h_r(x0))).
  double fitness(const seqcore::AminoSequence& x, const FitnessRepresentation& rep,
                 const seqcore::AminoSequence& x0) const;

  /// Mean or attention pooling, per the variant, weighted by the set weights.
  std::vector<double> repertoire_embedding(const seqcore::WeightedSet& set) const;
  std::vector<double> repertoire_embedding(std::span<const seqcore::TokenizedSequence* const> batch) const;
  /// Attention pooling regardless of variant; requires attention parameters.
  AttentionPool attention_pool(const seqcore::WeightedSet& set) const;

  /// rep may be null for variants without a fitness model.
  double outcome_mean(std::span<const double> embedding, const FitnessRepresentation* rep) const;
  double outcome_loglik(double y, std::span<const double> embedding, const FitnessRepresentation* rep) const;
  double propensity_loglik(std::span<const double> embedding, std::span<const double> rho) const;
  double tau_y() const;
  double tau_e() const;

  /// Minibatch loss (negated scaled log joint). With want_grad the gradient
  /// of the loss is added to the store grads, including W and B, which the
  /// trainer leaves to the propensity step.
  ObjectiveResult objective(std::span<const PatientBatch> batch, const ObjectiveOptions& opts, bool want_grad);
  /// Propensity loss with embeddings and rho held fixed; gradients reach
  /// only W, B and log_tau_e.
  double propensity_objective(std::span<const std::vector<double>> embeddings,
                              std::span<const FitnessRepresentation> reps, double patient_scale, bool want_grad);

 private:
  void require_fitness(const char* what) const;
  void embed_batch(std::span<const seqcore::TokenizedSequence* const> seqs, const std::vector<double>* weights,
                   std::vector<double>& emb, double* log_mean_g) const;
  FitnessRepresentation encoder_head(const std::vector<double>& diff) const;

  ModelConfig cfg_;
  VariantTraits traits_;
  ConvStage theta_, phi_conv_, enc_conv_;
  Mlp phi_ff_, enc_ff_, attn_ff_;
  ndiff::ParamStore* store_ = nullptr;
  ndiff::Param *gamma_a_ = nullptr, *gamma_r_ = nullptr, *gamma_y_ = nullptr, *log_tau_y_ = nullptr;
  ndiff::Param *w_ = nullptr, *b_ = nullptr, *log_tau_e_ = nullptr, *query_ = nullptr;

  // Per-sequence scratch for backward passes.
  std::vector<ConvTrace> theta_traces_, phi_traces_, enc_traces_;
  std::vector<MlpTrace> phi_ff_traces_, attn_traces_;
};

}  // namespace caire::models
