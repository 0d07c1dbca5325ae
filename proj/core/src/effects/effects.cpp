#include "caire/effects/effects.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "caire/errors.hpp"
#include "caire/seqcore/cohort_io.hpp"

namespace caire::effects {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void check_epsilon(double epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("epsilon must lie in [0, 1]");
}

}  // namespace

EffectModel::EffectModel(const train::FittedModel& fm) : params_(fm.params), model_(fm.model), summary_(fm.summary) {
  model_.bind(params_);
  if (summary_.mean_embedding.size() != fm.model.d_a) throw ShapeError("cohort summary does not match the model");
  if (model_.variant_traits().attention && summary_.attention_embeddings.empty())
    throw ShapeError("attention model without per-patient cohort summary");
}

double EffectModel::ate(const seqcore::AminoSequence& a_star, double epsilon) const {
  check_epsilon(epsilon);
  return ate_from_embedding(model_.h_a(a_star), epsilon);
}

double EffectModel::ate(const seqcore::TokenizedSequence& a_star, double epsilon) const {
  check_epsilon(epsilon);
  std::vector<double> h(model_.config().d_a);
  model_.h_a(a_star, h.data());
  return ate_from_embedding(h, epsilon);
}

double EffectModel::ate_from_embedding(const std::vector<double>& h, double epsilon) const {
  if (epsilon == 0.0) return 0.0;
  const auto& ga = model_.params().value("gamma_a");
  const std::size_t da = h.size();
  if (!model_.variant_traits().attention) {
    double s = 0.0;
    for (std::size_t d = 0; d < da; ++d) s += ga[d] * (h[d] - summary_.mean_embedding[d]);
    return epsilon * s;
  }
  // The mixed embedding is (1 - w) E_i[h g] / E_i[g] + w h*, where
  // w = eps g* / ((1 - eps) E_i[g] + eps g*), computed in log space.
  const double log_g = model_.attention_logit(h.data());
  const std::size_t n = summary_.attention_embeddings.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = epsilon == 1.0 ? 1.0
                                    : sigmoid(std::log(epsilon) + log_g - std::log1p(-epsilon) -
                                              summary_.attention_log_mean_g[i]);
    const auto& e = summary_.attention_embeddings[i];
    double s = 0.0;
    for (std::size_t d = 0; d < da; ++d) s += ga[d] * (h[d] - e[d]);
    total += w * s;
  }
  return total / static_cast<double>(n);
}

double EffectModel::repertoire_effect(const seqcore::WeightedSet& rep) const {
  double s = 0.0;
  for (std::size_t j = 0; j < rep.size(); ++j) s += rep.weights()[j] * ate(rep.tokens()[j], 1.0);
  return s;
}

SignStats sign_stats(std::span<const double> per_model) {
  const std::size_t k = per_model.size();
  if (k < 2) throw Error("ensemble statistics need at least 2 models");
  SignStats s;
  s.mu_hat = std::accumulate(per_model.begin(), per_model.end(), 0.0) / static_cast<double>(k);
  double ss = 0.0;
  for (double v : per_model) ss += (v - s.mu_hat) * (v - s.mu_hat);
  s.sigma_hat = std::sqrt(ss / static_cast<double>(k - 1));
  if (s.sigma_hat == 0.0) {
    s.p_tilde = s.mu_hat == 0.0 ? 0.5 : 0.0;
  } else {
    // Normal CDF at 0 for N(|mu|, sigma).
    s.p_tilde = 0.5 * std::erfc(std::abs(s.mu_hat) / (s.sigma_hat * std::numbers::sqrt2));
  }
  return s;
}

EffectEstimate ensemble_ate(std::span<const std::unique_ptr<EffectModel>> ensemble,
                            const seqcore::AminoSequence& a_star, double epsilon) {
  if (ensemble.size() < 2) throw Error("ensemble_ate needs at least 2 models");
  EffectEstimate est;
  est.sequence = a_star;
  est.epsilon = epsilon;
  for (const auto& m : ensemble) est.per_model.push_back(m->ate(a_star, epsilon));
  const auto s = sign_stats(est.per_model);
  est.mu_hat = s.mu_hat;
  est.sigma_hat = s.sigma_hat;
  est.p_tilde = s.p_tilde;
  est.ate = s.mu_hat;
  return est;
}

EffectSpread effect_decomposition(const EffectModel& model, std::span<const seqcore::WeightedSet> repertoires) {
  if (repertoires.size() < 2) throw Error("effect decomposition needs at least 2 repertoires");
  std::vector<double> means;
  double within = 0.0;
  for (const auto& rep : repertoires) {
    std::vector<double> e(rep.size());
    double mean = 0.0;
    for (std::size_t j = 0; j < rep.size(); ++j) {
      e[j] = model.ate(rep.tokens()[j], 1.0);
      mean += rep.weights()[j] * e[j];
    }
    double var = 0.0;
    for (std::size_t j = 0; j < rep.size(); ++j) var += rep.weights()[j] * (e[j] - mean) * (e[j] - mean);
    means.push_back(mean);
    within += var;
  }
  const double n = static_cast<double>(repertoires.size());
  const double grand = std::accumulate(means.begin(), means.end(), 0.0) / n;
  double between = 0.0;
  for (double m : means) between += (m - grand) * (m - grand);
  return {std::sqrt(between / n), std::sqrt(within / n)};
}

void write_effects_csv(std::span<const EffectEstimate> estimates, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  // Commas and line breaks inside free text would break the row structure.
  auto clean = [](std::string s) {
    for (char& c : s)
      if (c == ',' || c == '\n' || c == '\r') c = c == ',' ? ';' : ' ';
    return s;
  };
  out << "sequence,ate,mu_hat,sigma_hat,p_tilde,error\n";
  for (const auto& e : estimates)
    out << clean(e.error.empty() ? e.sequence.str() : e.input) << ',' << seqcore::format_double(e.ate) << ',' << seqcore::format_double(e.mu_hat) << ','
        << seqcore::format_double(e.sigma_hat) << ',' << seqcore::format_double(e.p_tilde) << ','
        << clean(e.error) << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace caire::effects
