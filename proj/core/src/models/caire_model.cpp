#include "caire/models/caire_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "caire/errors.hpp"
#include "caire/ndiff/layers.hpp"

namespace caire::models {

using seqcore::TokenizedSequence;

namespace {

constexpr ndiff::PriorSpec kHeadPrior{ndiff::PriorFamily::kNormal, 0.0, 100.0};
constexpr ndiff::PriorSpec kPropensityPrior{ndiff::PriorFamily::kNormal, 0.0, 10.0};
constexpr ndiff::PriorSpec kScalePrior{ndiff::PriorFamily::kLogNormal, -1.0, 2.0};
constexpr double kRhoPriorSd = 1.0;
constexpr double kBetaPriorSd = 10.0;

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

std::vector<const TokenizedSequence*> pointers(const seqcore::WeightedSet& set) {
  std::vector<const TokenizedSequence*> out;
  out.reserve(set.size());
  for (const auto& t : set.tokens()) out.push_back(&t);
  return out;
}

}  // namespace

CaireModel::CaireModel(ModelConfig cfg) : cfg_(std::move(cfg)), traits_(traits(cfg_.variant)) {
  cfg_.validate();
  const Pooling pool = traits_.linear ? Pooling::kSum : Pooling::kMaxSelu;
  theta_ = ConvStage("theta.conv", cfg_.d_a, cfg_.kernel, cfg_.encoding, pool);
  if (traits_.fitness) {
    phi_conv_ = ConvStage("phi.conv", cfg_.fitness_channels, cfg_.kernel, cfg_.encoding, pool);
    if (traits_.linear)
      phi_ff_ = Mlp("phi", {cfg_.fitness_channels, cfg_.d_r});
    else
      phi_ff_ = Mlp("phi", {cfg_.fitness_channels, cfg_.fitness_hidden, cfg_.fitness_hidden, cfg_.d_r});
    enc_conv_ = ConvStage("enc.conv", cfg_.encoder_channels, cfg_.kernel, cfg_.encoding, pool);
    enc_ff_ = Mlp("enc", {cfg_.encoder_channels, cfg_.encoder_hidden, cfg_.d_r + 1});
  }
  if (traits_.attention) attn_ff_ = Mlp("attn", {cfg_.d_a, cfg_.attention_hidden, cfg_.attention_hidden}, true);
}

void CaireModel::register_params(ndiff::ParamStore& store) const {
  theta_.add_params(store);
  if (traits_.attention) {
    attn_ff_.add_params(store);
    store.add("attn.query", {cfg_.attention_hidden});
  }
  if (traits_.fitness) {
    phi_conv_.add_params(store);
    phi_ff_.add_params(store);
    enc_conv_.add_params(store);
    enc_ff_.add_params(store);
  }
  store.add("gamma_a", {cfg_.d_a}, kHeadPrior);
  if (traits_.fitness) store.add("gamma_r", {cfg_.d_r}, kHeadPrior);
  store.add("gamma_y", {1}, kHeadPrior);
  store.add("log_tau_y", {1}, kScalePrior, true);
  if (traits_.propensity) {
    store.add("W", {cfg_.d_a, cfg_.d_r}, kPropensityPrior);
    store.add("B", {cfg_.d_a}, kPropensityPrior);
    store.add("log_tau_e", {1}, kScalePrior, true);
  }
}

ndiff::ParamStore CaireModel::init_params(seqcore::Rng& rng) const {
  ndiff::ParamStore store;
  register_params(store);
  seqcore::Rng r_theta = rng.split(1), r_attn = rng.split(2), r_phi = rng.split(3), r_enc = rng.split(4);
  theta_.init_params(store, r_theta);
  if (traits_.attention) {
    attn_ff_.init_params(store, r_attn);
    const double bound = 1.0 / std::sqrt(static_cast<double>(cfg_.attention_hidden));
    for (double& v : store.value("attn.query").values()) v = bound * (2.0 * r_attn.uniform() - 1.0);
  }
  if (traits_.fitness) {
    phi_conv_.init_params(store, r_phi);
    phi_ff_.init_params(store, r_phi);
    enc_conv_.init_params(store, r_enc);
    enc_ff_.init_params(store, r_enc);
  }
  store.value("log_tau_y")[0] = -1.0;
  if (traits_.propensity) store.value("log_tau_e")[0] = -1.0;
  return store;
}

std::vector<std::string> CaireModel::propensity_param_names() const {
  if (!traits_.propensity) return {};
  return {"W", "B", "log_tau_e"};
}

std::vector<std::string> CaireModel::main_param_names() const {
  ndiff::ParamStore probe;
  register_params(probe);
  const auto prop = propensity_param_names();
  std::vector<std::string> out;
  for (const auto& p : probe.entries())
    if (std::find(prop.begin(), prop.end(), p.name) == prop.end()) out.push_back(p.name);
  return out;
}

std::vector<std::string> CaireModel::main_prior_names() const {
  std::vector<std::string> out{"gamma_a"};
  if (traits_.fitness) out.push_back("gamma_r");
  out.push_back("gamma_y");
  out.push_back("log_tau_y");
  return out;
}

void CaireModel::bind(ndiff::ParamStore& store) {
  store_ = &store;
  theta_.prepare(store, cfg_.l_max);
  if (traits_.fitness) {
    phi_conv_.prepare(store, cfg_.l_max);
    phi_ff_.prepare(store);
    enc_conv_.prepare(store, cfg_.l_max);
    enc_ff_.prepare(store);
  }
  if (traits_.attention) {
    attn_ff_.prepare(store);
    query_ = &store.at("attn.query");
  }
  gamma_a_ = &store.at("gamma_a");
  gamma_r_ = traits_.fitness ? &store.at("gamma_r") : nullptr;
  gamma_y_ = &store.at("gamma_y");
  log_tau_y_ = &store.at("log_tau_y");
  if (traits_.propensity) {
    w_ = &store.at("W");
    b_ = &store.at("B");
    log_tau_e_ = &store.at("log_tau_e");
  }
}

ndiff::ParamStore& CaireModel::params() const {
  if (!store_) throw Error("model is not bound to parameters");
  return *store_;
}

void CaireModel::require_fitness(const char* what) const {
  if (!traits_.fitness)
    throw ConfigError(std::string(what) + " is not defined for variant " + std::string(to_string(cfg_.variant)));
}

std::vector<double> CaireModel::h_a(const seqcore::AminoSequence& seq) const {
  seqcore::check_fits(seq, cfg_.l_max);
  std::vector<double> out(cfg_.d_a);
  h_a(seqcore::tokenize(seq), out.data());
  return out;
}

void CaireModel::h_a(const TokenizedSequence& seq, double* out) const { theta_.forward(seq, out); }

std::vector<double> CaireModel::h_r(const seqcore::AminoSequence& seq) const {
  seqcore::check_fits(seq, cfg_.l_max);
  std::vector<double> out(cfg_.d_r);
  h_r(seqcore::tokenize(seq), out.data());
  return out;
}

void CaireModel::h_r(const TokenizedSequence& seq, double* out) const {
  require_fitness("h_r");
  std::vector<double> c(cfg_.fitness_channels);
  phi_conv_.forward(seq, c.data());
  phi_ff_.forward(c.data(), out);
}

double CaireModel::attention_logit(const double* ha) const {
  if (!traits_.attention) throw ConfigError("variant has no attention network");
  std::vector<double> a(cfg_.attention_hidden);
  attn_ff_.forward(ha, a.data());
  return dot(query_->value.data(), a.data(), a.size()) / std::sqrt(static_cast<double>(cfg_.attention_hidden));
}

FitnessRepresentation CaireModel::encoder_head(const std::vector<double>& diff) const {
  std::vector<double> out(cfg_.d_r + 1);
  enc_ff_.forward(diff.data(), out.data());
  FitnessRepresentation rep;
  rep.rho.assign(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(cfg_.d_r));
  rep.beta = out.back();
  return rep;
}

FitnessRepresentation CaireModel::encode_patient(const seqcore::WeightedSet& mature,
                                                 const seqcore::WeightedSet& pre) const {
  require_fitness("encode_patient");
  if (mature.empty() || pre.empty()) throw Error("encode_patient needs nonempty mature and pre-selection sets");
  const std::size_t ec = cfg_.encoder_channels;
  // Separate sums so identical sets give an exactly zero difference.
  std::vector<double> mean_a(ec, 0.0), mean_z(ec, 0.0), e(ec), diff(ec);
  for (std::size_t j = 0; j < mature.size(); ++j) {
    enc_conv_.forward(mature.tokens()[j], e.data());
    for (std::size_t o = 0; o < ec; ++o) mean_a[o] += mature.weights()[j] * e[o];
  }
  for (std::size_t j = 0; j < pre.size(); ++j) {
    enc_conv_.forward(pre.tokens()[j], e.data());
    for (std::size_t o = 0; o < ec; ++o) mean_z[o] += pre.weights()[j] * e[o];
  }
  for (std::size_t o = 0; o < ec; ++o) diff[o] = mean_a[o] - mean_z[o];
  return encoder_head(diff);
}

FitnessRepresentation CaireModel::encode_patient(std::span<const TokenizedSequence* const> mature,
                                                 std::span<const TokenizedSequence* const> pre) const {
  require_fitness("encode_patient");
  if (mature.empty() || pre.empty()) throw Error("encode_patient needs nonempty mature and pre-selection batches");
  const std::size_t ec = cfg_.encoder_channels;
  std::vector<double> sum_a(ec, 0.0), sum_z(ec, 0.0), e(ec), diff(ec);
  for (const auto* s : mature) {
    enc_conv_.forward(*s, e.data());
    for (std::size_t o = 0; o < ec; ++o) sum_a[o] += e[o];
  }
  for (const auto* s : pre) {
    enc_conv_.forward(*s, e.data());
    for (std::size_t o = 0; o < ec; ++o) sum_z[o] += e[o];
  }
  for (std::size_t o = 0; o < ec; ++o)
    diff[o] = sum_a[o] / static_cast<double>(mature.size()) - sum_z[o] / static_cast<double>(pre.size());
  return encoder_head(diff);
}

double CaireModel::classifier_logit(const TokenizedSequence& seq, const FitnessRepresentation& rep) const {
  std::vector<double> r(cfg_.d_r);
  h_r(seq, r.data());
  return dot(rep.rho.data(), r.data(), cfg_.d_r) + rep.beta;
}

double CaireModel::classifier_loglik(const TokenizedSequence& seq, int s, const FitnessRepresentation& rep) const {
  return ndiff::bernoulli_loglik_logit(static_cast<double>(s), classifier_logit(seq, rep));
}

double CaireModel::fitness(const seqcore::AminoSequence& x, const FitnessRepresentation& rep,
                           const seqcore::AminoSequence& x0) const {
  const auto hx = h_r(x), h0 = h_r(x0);
  double s = 0.0;
  for (std::size_t k = 0; k < cfg_.d_r; ++k) s += rep.rho[k] * (hx[k] - h0[k]);
  return std::exp(s);
}

void CaireModel::embed_batch(std::span<const TokenizedSequence* const> seqs, const std::vector<double>* weights,
                             std::vector<double>& emb, double* log_mean_g) const {
  if (seqs.empty()) throw Error("repertoire embedding of an empty batch");
  const std::size_t da = cfg_.d_a;
  emb.assign(da, 0.0);
  std::vector<double> h(da);
  auto weight = [&](std::size_t j) { return weights ? (*weights)[j] : 1.0; };
  if (!traits_.attention) {
    double total = 0.0;
    for (std::size_t j = 0; j < seqs.size(); ++j) {
      const double w = weight(j);
      if (w == 0.0) continue;
      theta_.forward(*seqs[j], h.data());
      for (std::size_t d = 0; d < da; ++d) emb[d] += w * h[d];
      total += w;
    }
    for (double& v : emb) v /= total;
    return;
  }
  // Softmax over log g + log w, subtracting the max for stability.
  std::vector<double> hs(seqs.size() * da), l(seqs.size(), -std::numeric_limits<double>::infinity());
  double lmax = -std::numeric_limits<double>::infinity(), total_w = 0.0;
  for (std::size_t j = 0; j < seqs.size(); ++j) {
    const double w = weight(j);
    if (w == 0.0) continue;
    theta_.forward(*seqs[j], hs.data() + j * da);
    l[j] = attention_logit(hs.data() + j * da) + std::log(w);
    lmax = std::max(lmax, l[j]);
    total_w += w;
  }
  double z = 0.0;
  for (std::size_t j = 0; j < seqs.size(); ++j) {
    if (!std::isfinite(l[j])) continue;
    const double p = std::exp(l[j] - lmax);
    z += p;
    for (std::size_t d = 0; d < da; ++d) emb[d] += p * hs[j * da + d];
  }
  for (double& v : emb) v /= z;
  if (log_mean_g) *log_mean_g = lmax + std::log(z) - std::log(total_w);
}

std::vector<double> CaireModel::repertoire_embedding(const seqcore::WeightedSet& set) const {
  std::vector<double> emb;
  embed_batch(pointers(set), &set.weights(), emb, nullptr);
  return emb;
}

std::vector<double> CaireModel::repertoire_embedding(std::span<const TokenizedSequence* const> batch) const {
  std::vector<double> emb;
  embed_batch(batch, nullptr, emb, nullptr);
  return emb;
}

AttentionPool CaireModel::attention_pool(const seqcore::WeightedSet& set) const {
  if (!traits_.attention) throw ConfigError("variant has no attention network");
  AttentionPool out;
  embed_batch(pointers(set), &set.weights(), out.embedding, &out.log_mean_g);
  return out;
}

double CaireModel::tau_y() const { return std::exp(log_tau_y_->value[0]); }

double CaireModel::tau_e() const {
  if (!traits_.propensity) throw ConfigError("variant has no propensity model");
  return std::exp(log_tau_e_->value[0]);
}

double CaireModel::outcome_mean(std::span<const double> embedding, const FitnessRepresentation* rep) const {
  const std::size_t da = cfg_.d_a, dr = cfg_.d_r;
  if (embedding.size() != da) throw ShapeError("embedding has the wrong dimension");
  if (traits_.fitness && (!rep || rep->rho.size() != dr))
    throw ShapeError("variant needs a fitness representation of dimension d_r");
  const double* ga = gamma_a_->value.data();
  double mu = gamma_y_->value[0];
  for (std::size_t d = 0; d < da; ++d) {
    double r = embedding[d];
    if (traits_.propensity) {
      r -= b_->value[d];
      for (std::size_t k = 0; k < dr; ++k) r -= w_->value(d, k) * rep->rho[k];
    }
    mu += ga[d] * r;
  }
  if (traits_.fitness) mu += dot(gamma_r_->value.data(), rep->rho.data(), dr);
  return mu;
}

double CaireModel::outcome_loglik(double y, std::span<const double> embedding,
                                  const FitnessRepresentation* rep) const {
  return ndiff::gaussian_loglik(y, outcome_mean(embedding, rep), tau_y());
}

double CaireModel::propensity_loglik(std::span<const double> embedding, std::span<const double> rho) const {
  const double te = tau_e();
  if (embedding.size() != cfg_.d_a || rho.size() != cfg_.d_r) throw ShapeError("propensity input dimensions");
  double ll = 0.0;
  for (std::size_t d = 0; d < cfg_.d_a; ++d) {
    double mean = b_->value[d];
    for (std::size_t k = 0; k < cfg_.d_r; ++k) mean += w_->value(d, k) * rho[k];
    ll += ndiff::gaussian_loglik(embedding[d], mean, te);
  }
  return ll;
}

ObjectiveResult CaireModel::objective(std::span<const PatientBatch> batch, const ObjectiveOptions& opts,
                                      bool want_grad) {
  if (!store_) throw Error("model is not bound to parameters");
  const std::size_t da = cfg_.d_a, dr = cfg_.d_r;
  const std::size_t ec = cfg_.encoder_channels, fc = cfg_.fitness_channels, ah = cfg_.attention_hidden;
  const double att_scale = 1.0 / std::sqrt(static_cast<double>(ah));
  const double ps = opts.patient_scale, c = -ps;
  const double ty = tau_y();
  ObjectiveResult res;

  std::vector<double> H, A, P, E, C, R, logits, d_emb(da), d_rho(dr), dh(da), da_buf(ah), dc(fc), dr_buf(dr);
  for (const PatientBatch& pb : batch) {
    const std::size_t na = pb.mature.size();
    if (na == 0) throw Error("patient batch without mature sequences");

    // Repertoire embedding.
    H.assign(na * da, 0.0);
    if (theta_traces_.size() < na) theta_traces_.resize(na);
    for (std::size_t j = 0; j < na; ++j)
      theta_.forward(*pb.mature[j], H.data() + j * da, want_grad ? &theta_traces_[j] : nullptr);
    std::vector<double> emb(da, 0.0);
    if (traits_.attention) {
      A.assign(na * ah, 0.0);
      P.assign(na, 0.0);
      if (attn_traces_.size() < na) attn_traces_.resize(na);
      double lmax = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < na; ++j) {
        attn_ff_.forward(H.data() + j * da, A.data() + j * ah, &attn_traces_[j]);
        P[j] = dot(query_->value.data(), A.data() + j * ah, ah) * att_scale;
        lmax = std::max(lmax, P[j]);
      }
      double z = 0.0;
      for (double& p : P) {
        p = std::exp(p - lmax);
        z += p;
      }
      for (std::size_t j = 0; j < na; ++j) {
        P[j] /= z;
        for (std::size_t d = 0; d < da; ++d) emb[d] += P[j] * H[j * da + d];
      }
    } else {
      for (std::size_t j = 0; j < na; ++j)
        for (std::size_t d = 0; d < da; ++d) emb[d] += H[j * da + d];
      for (double& v : emb) v /= static_cast<double>(na);
    }

    // Fitness representation and classifier.
    FitnessRepresentation rep;
    MlpTrace enc_trace;
    std::size_t nz = 0, n = na;
    double cls_ll = 0.0, lp = 0.0;
    std::vector<double> d_lp_rho(dr, 0.0);
    double d_lp_beta = 0.0;
    auto seq_at = [&](std::size_t j) -> const TokenizedSequence& {
      return j < na ? *pb.mature[j] : *pb.preselection[j - na];
    };
    if (traits_.fitness) {
      nz = pb.preselection.size();
      if (nz == 0) throw Error("patient batch without pre-selection sequences");
      n = na + nz;
      E.assign(n * ec, 0.0);
      if (enc_traces_.size() < n) enc_traces_.resize(n);
      std::vector<double> sum_a(ec, 0.0), sum_z(ec, 0.0), diff(ec);
      for (std::size_t j = 0; j < n; ++j) {
        enc_conv_.forward(seq_at(j), E.data() + j * ec, want_grad ? &enc_traces_[j] : nullptr);
        auto& sum = j < na ? sum_a : sum_z;
        for (std::size_t o = 0; o < ec; ++o) sum[o] += E[j * ec + o];
      }
      for (std::size_t o = 0; o < ec; ++o)
        diff[o] = sum_a[o] / static_cast<double>(na) - sum_z[o] / static_cast<double>(nz);
      std::vector<double> out(dr + 1);
      enc_ff_.forward(diff.data(), out.data(), &enc_trace);
      rep.rho.assign(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(dr));
      rep.beta = out[dr];

      C.assign(n * fc, 0.0);
      R.assign(n * dr, 0.0);
      logits.assign(n, 0.0);
      if (phi_traces_.size() < n) phi_traces_.resize(n);
      if (phi_ff_traces_.size() < n) phi_ff_traces_.resize(n);
      for (std::size_t j = 0; j < n; ++j) {
        phi_conv_.forward(seq_at(j), C.data() + j * fc, want_grad ? &phi_traces_[j] : nullptr);
        phi_ff_.forward(C.data() + j * fc, R.data() + j * dr, &phi_ff_traces_[j]);
        const double logit = dot(rep.rho.data(), R.data() + j * dr, dr) + rep.beta;
        logits[j] = logit;
        const double s = j < na ? 1.0 : 0.0;
        cls_ll += ndiff::bernoulli_loglik_logit(s, logit);
        if ((logit > 0.0) == (j < na)) ++res.classifier_correct;
      }
      res.classifier_total += n;
      for (std::size_t k = 0; k < dr; ++k) lp += ndiff::normal_logprior(rep.rho[k], 0.0, kRhoPriorSd, &d_lp_rho[k]);
      lp += ndiff::normal_logprior(rep.beta, 0.0, kBetaPriorSd, &d_lp_beta);
    }

    const FitnessRepresentation* rep_ptr = traits_.fitness ? &rep : nullptr;
    const double mu = outcome_mean(emb, rep_ptr);
    const double ll_y = ndiff::gaussian_loglik(pb.outcome, mu, ty);
    res.classifier_loglik += cls_ll;
    res.outcome_loglik += ll_y;
    res.latent_logprior += lp;
    res.loss -= ps * (pb.sequence_scale * cls_ll + ll_y + opts.xi * lp);

    if (want_grad) {
      const auto gg = ndiff::gaussian_loglik_grad(pb.outcome, mu, ty);
      const double dmu = c * gg.d_mean;
      log_tau_y_->grad[0] += c * gg.d_scale * ty;
      gamma_y_->grad[0] += dmu;
      const double* ga = gamma_a_->value.data();
      std::fill(d_rho.begin(), d_rho.end(), 0.0);
      double d_beta = 0.0;
      for (std::size_t d = 0; d < da; ++d) {
        double r = emb[d];
        if (traits_.propensity) {
          r -= b_->value[d];
          for (std::size_t k = 0; k < dr; ++k) {
            r -= w_->value(d, k) * rep.rho[k];
            d_rho[k] -= dmu * ga[d] * w_->value(d, k);
            w_->grad(d, k) -= dmu * ga[d] * rep.rho[k];
          }
          b_->grad[d] -= dmu * ga[d];
        }
        gamma_a_->grad[d] += dmu * r;
        d_emb[d] = dmu * ga[d];
      }

      if (traits_.fitness) {
        for (std::size_t k = 0; k < dr; ++k) {
          gamma_r_->grad[k] += dmu * rep.rho[k];
          d_rho[k] += dmu * gamma_r_->value[k] + c * opts.xi * d_lp_rho[k];
        }
        d_beta += c * opts.xi * d_lp_beta;

        for (std::size_t j = 0; j < n; ++j) {
          const double s = j < na ? 1.0 : 0.0;
          const double g = c * pb.sequence_scale * (s - ndiff::sigmoid(logits[j]));
          const double* rj = R.data() + j * dr;
          for (std::size_t k = 0; k < dr; ++k) {
            d_rho[k] += g * rj[k];
            dr_buf[k] = g * rep.rho[k];
          }
          d_beta += g;
          phi_ff_.backward(phi_ff_traces_[j], dr_buf.data(), dc.data());
          phi_conv_.backward(seq_at(j), phi_traces_[j], dc.data());
        }

        std::vector<double> d_out(dr + 1), d_diff(ec), de(ec);
        std::copy(d_rho.begin(), d_rho.end(), d_out.begin());
        d_out[dr] = d_beta;
        enc_ff_.backward(enc_trace, d_out.data(), d_diff.data());
        for (std::size_t j = 0; j < n; ++j) {
          const double w = j < na ? 1.0 / static_cast<double>(na) : -1.0 / static_cast<double>(nz);
          for (std::size_t o = 0; o < ec; ++o) de[o] = w * d_diff[o];
          enc_conv_.backward(seq_at(j), enc_traces_[j], de.data());
        }
      }

      for (std::size_t j = 0; j < na; ++j) {
        const double* hj = H.data() + j * da;
        if (traits_.attention) {
          double dl = 0.0;
          for (std::size_t d = 0; d < da; ++d) {
            dh[d] = P[j] * d_emb[d];
            dl += P[j] * (hj[d] - emb[d]) * d_emb[d];
          }
          const double* aj = A.data() + j * ah;
          for (std::size_t q = 0; q < ah; ++q) {
            query_->grad[q] += dl * att_scale * aj[q];
            da_buf[q] = dl * att_scale * query_->value[q];
          }
          std::vector<double> dh_att(da);
          attn_ff_.backward(attn_traces_[j], da_buf.data(), dh_att.data());
          for (std::size_t d = 0; d < da; ++d) dh[d] += dh_att[d];
        } else {
          for (std::size_t d = 0; d < da; ++d) dh[d] = d_emb[d] / static_cast<double>(na);
        }
        theta_.backward(*pb.mature[j], theta_traces_[j], dh.data());
      }
    }

    res.embeddings.push_back(std::move(emb));
    res.outcome_means.push_back(mu);
    res.representations.push_back(std::move(rep));
  }

  res.global_logprior = store_->log_prior(main_prior_names(), want_grad, 1.0);
  res.loss -= res.global_logprior;
  if (want_grad) {
    theta_.flush_grads();
    if (traits_.fitness) {
      phi_conv_.flush_grads();
      enc_conv_.flush_grads();
    }
  }
  return res;
}

double CaireModel::propensity_objective(std::span<const std::vector<double>> embeddings,
                                        std::span<const FitnessRepresentation> reps, double patient_scale,
                                        bool want_grad) {
  if (!traits_.propensity) throw ConfigError("variant has no propensity model");
  if (embeddings.size() != reps.size()) throw ShapeError("embeddings and representations differ in count");
  const std::size_t da = cfg_.d_a, dr = cfg_.d_r;
  const double te = tau_e(), c = -patient_scale;
  double ll = 0.0;
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    const auto& emb = embeddings[i];
    const auto& rho = reps[i].rho;
    if (emb.size() != da || rho.size() != dr) throw ShapeError("propensity input dimensions");
    for (std::size_t d = 0; d < da; ++d) {
      double mean = b_->value[d];
      for (std::size_t k = 0; k < dr; ++k) mean += w_->value(d, k) * rho[k];
      ll += ndiff::gaussian_loglik(emb[d], mean, te);
      if (want_grad) {
        const auto gg = ndiff::gaussian_loglik_grad(emb[d], mean, te);
        const double dm = c * gg.d_mean;
        for (std::size_t k = 0; k < dr; ++k) w_->grad(d, k) += dm * rho[k];
        b_->grad[d] += dm;
        log_tau_e_->grad[0] += c * gg.d_scale * te;
      }
    }
  }
  return -patient_scale * ll - store_->log_prior(propensity_param_names(), want_grad, 1.0);
}

}  // namespace caire::models
