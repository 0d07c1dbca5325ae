#include "caire/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "caire/errors.hpp"
#include "caire/seqcore/cohort_io.hpp"

namespace caire::train {

using models::CaireModel;
using models::PatientBatch;
using seqcore::CohortDataset;
using seqcore::Repertoire;

namespace {

constexpr std::uint64_t kStepStream = 0x73746570;  // "step"
constexpr std::uint64_t kValStream = 0x76616c;      // "val"

std::vector<const seqcore::TokenizedSequence*> draw_tokens(const seqcore::WeightedSet& set, std::size_t k,
                                                           seqcore::Rng& rng) {
  std::vector<const seqcore::TokenizedSequence*> out;
  out.reserve(k);
  for (std::size_t i : seqcore::sample_indices(set, k, rng)) out.push_back(&set.tokens()[i]);
  return out;
}

std::string diagnostics(const ndiff::ParamStore& store) {
  std::ostringstream os;
  for (const auto& p : store.entries()) {
    double max_abs = 0.0, max_grad = 0.0;
    bool finite = true;
    for (double v : p.value.values()) {
      finite = finite && std::isfinite(v);
      max_abs = std::max(max_abs, std::abs(v));
    }
    for (double g : p.grad.values()) max_grad = std::max(max_grad, std::abs(g));
    os << "\n  " << p.name << ": max|value| " << max_abs << ", max|grad| " << max_grad << (finite ? "" : " (non-finite)");
  }
  return os.str();
}

void put_scalar(ndiff::NamedArrays& out, std::string name, double v) {
  out.emplace_back(std::move(name), ndiff::Array({1}, std::vector<double>{v}));
}

const ndiff::Array& find_array(const ndiff::NamedArrays& arrays, const std::string& name) {
  for (const auto& [n, a] : arrays)
    if (n == name) return a;
  throw Error("checkpoint is missing array '" + name + "'");
}

bool has_array(const ndiff::NamedArrays& arrays, const std::string& name) {
  return std::any_of(arrays.begin(), arrays.end(), [&](const auto& e) { return e.first == name; });
}

ndiff::Array log_array(const std::vector<EvalRecord>& log) {
  ndiff::Array a({log.size(), 5});
  for (std::size_t i = 0; i < log.size(); ++i) {
    a(i, 0) = static_cast<double>(log[i].step);
    a(i, 1) = log[i].loss;
    a(i, 2) = log[i].val_score;
    a(i, 3) = log[i].accuracy;
    a(i, 4) = log[i].r2;
  }
  return a;
}

std::vector<EvalRecord> log_from_array(const ndiff::Array& a) {
  std::vector<EvalRecord> log;
  if (a.rank() != 2 || (a.size() > 0 && a.dim(1) != 5)) throw ShapeError("training log array must be (k, 5)");
  for (std::size_t i = 0; i < a.dim(0); ++i)
    log.push_back({static_cast<std::size_t>(a(i, 0)), a(i, 1), a(i, 2), a(i, 3), a(i, 4)});
  return log;
}

void opt_to_arrays(ndiff::NamedArrays& out, const std::string& prefix, const ndiff::AmsGradState& s) {
  for (std::size_t i = 0; i < s.names.size(); ++i) {
    out.emplace_back(prefix + "/m/" + s.names[i], s.m[i]);
    out.emplace_back(prefix + "/v/" + s.names[i], s.v[i]);
    out.emplace_back(prefix + "/v_hat/" + s.names[i], s.v_hat[i]);
  }
  put_scalar(out, prefix + "/t", static_cast<double>(s.t));
}

void opt_from_arrays(const ndiff::NamedArrays& arrays, const std::string& prefix, ndiff::AmsGradState& s) {
  auto load = [&](const std::string& name, ndiff::Array& into) {
    const auto& a = find_array(arrays, name);
    if (!a.same_shape(into)) throw ShapeError("optimizer state '" + name + "' has the wrong shape");
    into = a;
  };
  for (std::size_t i = 0; i < s.names.size(); ++i) {
    load(prefix + "/m/" + s.names[i], s.m[i]);
    load(prefix + "/v/" + s.names[i], s.v[i]);
    load(prefix + "/v_hat/" + s.names[i], s.v_hat[i]);
  }
  s.t = static_cast<std::uint64_t>(find_array(arrays, prefix + "/t")[0]);
}

}  // namespace

CohortSummary summarize_cohort(const CaireModel& model, const CohortDataset& data,
                               std::span<const std::size_t> patients) {
  if (patients.empty()) throw Error("cohort summary over zero patients");
  CohortSummary s;
  const std::size_t da = model.config().d_a;
  s.mean_embedding.assign(da, 0.0);
  s.n_patients = patients.size();
  const bool attention = model.variant_traits().attention;
  for (std::size_t i : patients) {
    const auto& set = data.repertoires.at(i).mature();
    std::vector<double> emb;
    if (attention) {
      auto pool = model.attention_pool(set);
      emb = pool.embedding;
      s.attention_embeddings.push_back(std::move(pool.embedding));
      s.attention_log_mean_g.push_back(pool.log_mean_g);
    } else {
      emb = model.repertoire_embedding(set);
    }
    for (std::size_t d = 0; d < da; ++d) s.mean_embedding[d] += emb[d];
  }
  for (double& v : s.mean_embedding) v /= static_cast<double>(patients.size());
  return s;
}

PatientSplit split_from_dataset(const CohortDataset& data) {
  PatientSplit split;
  for (std::size_t i = 0; i < data.repertoires.size(); ++i) {
    const auto it = data.split_assignment.find(data.repertoires[i].patient_id());
    if (it == data.split_assignment.end()) continue;
    if (it->second == seqcore::Split::kTrain) split.train.push_back(i);
    if (it->second == seqcore::Split::kValidation) split.validation.push_back(i);
  }
  return split;
}

double r_squared(std::span<const double> y, std::span<const double> prediction) {
  if (y.size() != prediction.size()) throw ShapeError("r_squared: size mismatch");
  if (y.empty()) return 0.0;
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  double ss_tot = 0.0, ss_res = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    ss_tot += (y[i] - mean) * (y[i] - mean);
    ss_res += (y[i] - prediction[i]) * (y[i] - prediction[i]);
  }
  if (ss_tot == 0.0) return 0.0;
  return 1.0 - ss_res / ss_tot;
}

Trainer::Trainer(const CohortDataset& data, PatientSplit split, models::ModelConfig model_cfg, TrainConfig cfg)
    : data_(data), split_(std::move(split)), cfg_(std::move(cfg)), model_(std::move(model_cfg)), rng_(cfg_.seed) {
  cfg_.validate();
  if (split_.train.empty()) throw ConfigError("training split is empty");
  if (split_.validation.empty()) throw ConfigError("validation split is empty");
  for (std::size_t i : split_.train) {
    const auto& r = data_.repertoires.at(i);
    if (model_.variant_traits().fitness && r.preselection().empty())
      throw ConfigError("patient " + r.patient_id() + " has no pre-selection sequences");
  }
  seqcore::Rng vr = rng_.split(kValStream);
  for (std::size_t k = 0; k < split_.validation.size(); ++k) {
    seqcore::Rng pr = vr.split(k);
    val_batches_.push_back(patient_batch(data_.repertoires.at(split_.validation[k]), pr));
  }
}

PatientBatch Trainer::patient_batch(const Repertoire& rep, seqcore::Rng& rng) const {
  const std::size_t half = cfg_.batch_seqs / 2;
  PatientBatch pb;
  pb.mature = draw_tokens(rep.mature(), half, rng);
  if (model_.variant_traits().fitness) pb.preselection = draw_tokens(rep.preselection(), half, rng);
  pb.outcome = rep.outcome();
  // The full-data objective sums over 2 m_i labelled sequences.
  pb.sequence_scale = 2.0 * static_cast<double>(rep.mature().size()) / static_cast<double>(cfg_.batch_seqs);
  return pb;
}

double Trainer::patient_scale() const noexcept {
  const std::size_t b = std::min(cfg_.batch_patients, split_.train.size());
  return static_cast<double>(split_.train.size()) / static_cast<double>(b);
}

std::vector<PatientBatch> Trainer::step_batch(std::size_t step) const {
  seqcore::Rng r = rng_.split(kStepStream).split(step);
  std::vector<std::size_t> pool = split_.train;
  const std::size_t b = std::min(cfg_.batch_patients, pool.size());
  for (std::size_t k = 0; k < b; ++k) std::swap(pool[k], pool[k + r.index(pool.size() - k)]);
  std::vector<PatientBatch> batch;
  for (std::size_t k = 0; k < b; ++k) batch.push_back(patient_batch(data_.repertoires[pool[k]], r));
  return batch;
}

TrainState Trainer::initial_state() const {
  TrainState s;
  seqcore::Rng init = rng_.split(0x696e6974);  // "init"
  s.params = model_.init_params(init);
  const ndiff::AmsGradConfig opt{cfg_.lr, 0.9, 0.999, 1e-8, cfg_.weight_decay};
  s.main_opt = ndiff::make_amsgrad_state(s.params, model_.main_param_names(), opt);
  s.propensity_opt = ndiff::make_amsgrad_state(s.params, model_.propensity_param_names(), opt);
  return s;
}

ValidationScore Trainer::validation_score(ndiff::ParamStore& params) {
  model_.bind(params);
  ValidationScore v;
  const bool fitness = model_.variant_traits().fitness;
  if (fitness) {
    const auto res = model_.objective(val_batches_, {}, false);
    v.accuracy = static_cast<double>(res.classifier_correct) / static_cast<double>(res.classifier_total);
  } else {
    v.accuracy = std::numeric_limits<double>::quiet_NaN();
  }
  std::vector<double> y, pred;
  for (std::size_t i : split_.validation) {
    const auto& rep = data_.repertoires[i];
    const auto emb = model_.repertoire_embedding(rep.mature());
    if (fitness) {
      const auto fr = model_.encode_patient(rep.mature(), rep.preselection());
      pred.push_back(model_.outcome_mean(emb, &fr));
    } else {
      pred.push_back(model_.outcome_mean(emb, nullptr));
    }
    y.push_back(rep.outcome());
  }
  v.r2 = r_squared(y, pred);
  v.score = fitness ? v.accuracy + v.r2 : v.r2;
  return v;
}

void Trainer::run(TrainState& state, std::size_t until_step) {
  const std::size_t until = std::min(until_step, cfg_.total_steps);
  const bool propensity = model_.variant_traits().propensity;
  const double ps = patient_scale();
  while (state.step < until) {
    const std::size_t t = state.step;
    const auto batch = step_batch(t);
    const models::ObjectiveOptions opts{ps, anneal_weight(t, cfg_.total_steps, cfg_.anneal_fraction)};

    model_.bind(state.params);
    state.params.zero_grad();
    const auto res = model_.objective(batch, opts, true);
    if (!std::isfinite(res.loss))
      throw NumericError("non-finite loss at step " + std::to_string(t) + diagnostics(state.params));
    ndiff::amsgrad_step(state.params, state.main_opt);

    // The propensity update reuses this step's embeddings and rho as fixed targets.
    if (propensity && t % cfg_.propensity_period == 0) {
      model_.bind(state.params);
      state.params.zero_grad();
      model_.propensity_objective(res.embeddings, res.representations, ps, true);
      ndiff::amsgrad_step(state.params, state.propensity_opt);
    }

    state.step = t + 1;
    if (state.step % cfg_.eval_period == 0 || state.step == cfg_.total_steps) {
      const auto v = validation_score(state.params);
      state.log.push_back({state.step, res.loss, v.score, v.accuracy, v.r2});
      if (!std::isfinite(v.score))
        throw NumericError("non-finite validation score at step " + std::to_string(state.step) +
                           diagnostics(state.params));
      if (v.score > state.best_score) {
        state.best_score = v.score;
        state.best_step = state.step;
        state.best_params = ndiff::param_values(state.params);
      }
    }
  }
}

FittedModel Trainer::finish(const TrainState& state) {
  if (state.best_params.empty()) throw Error("training recorded no validation evaluation");
  FittedModel fm;
  fm.model = model_.config();
  fm.train = cfg_;
  fm.params = state.params;
  ndiff::restore_params(fm.params, state.best_params);
  fm.params.zero_grad();
  fm.log = state.log;
  fm.best_score = state.best_score;
  fm.best_step = state.best_step;
  model_.bind(fm.params);
  fm.summary = summarize_cohort(model_, data_, split_.train);
  for (std::size_t i : split_.train) {
    const auto& rep = data_.repertoires[i];
    fm.train_patients.push_back(rep.patient_id());
    if (model_.variant_traits().fitness)
      fm.train_representations.push_back(model_.encode_patient(rep.mature(), rep.preselection()));
  }
  for (std::size_t i : split_.validation) fm.validation_patients.push_back(data_.repertoires[i].patient_id());
  return fm;
}

FittedModel train(const CohortDataset& data, const PatientSplit& split, const models::ModelConfig& model_cfg,
                  const TrainConfig& cfg) {
  Trainer trainer(data, split, model_cfg, cfg);
  TrainState state = trainer.initial_state();
  trainer.run(state, cfg.total_steps);
  return trainer.finish(state);
}

ndiff::NamedArrays state_to_arrays(const TrainState& state) {
  ndiff::NamedArrays out;
  put_scalar(out, "state/step", static_cast<double>(state.step));
  put_scalar(out, "state/best_score", state.best_score);
  put_scalar(out, "state/best_step", static_cast<double>(state.best_step));
  out.emplace_back("state/log", log_array(state.log));
  for (const auto& p : state.params.entries()) out.emplace_back("param/" + p.name, p.value);
  for (const auto& [n, a] : state.best_params) out.emplace_back("best/" + n, a);
  opt_to_arrays(out, "opt.main", state.main_opt);
  opt_to_arrays(out, "opt.propensity", state.propensity_opt);
  return out;
}

void state_from_arrays(TrainState& state, const ndiff::NamedArrays& arrays) {
  state.step = static_cast<std::size_t>(find_array(arrays, "state/step")[0]);
  state.best_score = find_array(arrays, "state/best_score")[0];
  state.best_step = static_cast<std::size_t>(find_array(arrays, "state/best_step")[0]);
  state.log = log_from_array(find_array(arrays, "state/log"));
  ndiff::NamedArrays params, best;
  for (const auto& [n, a] : arrays) {
    if (n.rfind("param/", 0) == 0) params.emplace_back(n.substr(6), a);
    if (n.rfind("best/", 0) == 0) best.emplace_back(n.substr(5), a);
  }
  ndiff::restore_params(state.params, params);
  state.best_params = std::move(best);
  opt_from_arrays(arrays, "opt.main", state.main_opt);
  opt_from_arrays(arrays, "opt.propensity", state.propensity_opt);
}

void write_training_log(const std::vector<EvalRecord>& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "step,loss,val_score,component_accuracy,component_r2\n";
  for (const auto& r : log)
    out << r.step << ',' << seqcore::format_double(r.loss) << ',' << seqcore::format_double(r.val_score) << ','
        << seqcore::format_double(r.accuracy) << ',' << seqcore::format_double(r.r2) << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

void save_fitted(const FittedModel& fm, const std::filesystem::path& checkpoint_path,
                 const std::filesystem::path& manifest_path) {
  ndiff::NamedArrays arrays;
  for (const auto& p : fm.params.entries()) arrays.emplace_back("param/" + p.name, p.value);
  const auto& s = fm.summary;
  arrays.emplace_back("summary/mean_embedding",
                      ndiff::Array({s.mean_embedding.size()}, s.mean_embedding));
  put_scalar(arrays, "summary/n_patients", static_cast<double>(s.n_patients));
  if (!s.attention_embeddings.empty()) {
    const std::size_t da = s.mean_embedding.size();
    ndiff::Array emb({s.attention_embeddings.size(), da});
    for (std::size_t i = 0; i < s.attention_embeddings.size(); ++i)
      for (std::size_t d = 0; d < da; ++d) emb(i, d) = s.attention_embeddings[i][d];
    arrays.emplace_back("summary/attention_embeddings", std::move(emb));
    arrays.emplace_back("summary/attention_log_mean_g",
                        ndiff::Array({s.attention_log_mean_g.size()}, s.attention_log_mean_g));
  }
  if (!fm.train_representations.empty()) {
    const std::size_t dr = fm.model.d_r;
    ndiff::Array rho({fm.train_representations.size(), dr}), beta({fm.train_representations.size()});
    for (std::size_t i = 0; i < fm.train_representations.size(); ++i) {
      for (std::size_t k = 0; k < dr; ++k) rho(i, k) = fm.train_representations[i].rho[k];
      beta[i] = fm.train_representations[i].beta;
    }
    arrays.emplace_back("patients/rho", std::move(rho));
    arrays.emplace_back("patients/beta", std::move(beta));
  }
  arrays.emplace_back("log", log_array(fm.log));
  ndiff::save_arrays(checkpoint_path, arrays);

  nlohmann::ordered_json j;
  j["format"] = "caire-model";
  j["version"] = 1;
  j["model"] = fm.model.to_json();
  j["parameters"] = nlohmann::ordered_json::array();
  for (const auto& p : fm.params.entries()) j["parameters"].push_back(p.name);
  nlohmann::ordered_json tj;
  for (const auto& [k, v] : fm.train.to_key_values()) tj[k] = v;
  j["train"] = tj;
  j["best_step"] = fm.best_step;
  j["best_score"] = fm.best_score;
  j["train_patients"] = fm.train_patients;
  j["validation_patients"] = fm.validation_patients;
  std::ofstream out(manifest_path, std::ios::binary);
  if (!out) throw Error("cannot write " + manifest_path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error("write failed: " + manifest_path.string());
}

FittedModel load_fitted(const std::filesystem::path& checkpoint_path, const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw Error("cannot open model manifest " + manifest_path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed model manifest " + manifest_path.string() + ": " + e.what());
  }
  FittedModel fm;
  try {
    if (j.at("format").get<std::string>() != "caire-model") throw ConfigError("not a model manifest");
    fm.model = models::ModelConfig::from_json(j.at("model"));
    for (const auto& [k, v] : j.at("train").items())
      if (!fm.train.set(k, v.get<std::string>())) throw ConfigError("unknown training setting '" + k + "'");
    fm.best_step = j.at("best_step").get<std::size_t>();
    fm.best_score = j.at("best_score").get<double>();
    fm.train_patients = j.at("train_patients").get<std::vector<std::string>>();
    fm.validation_patients = j.at("validation_patients").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed model manifest " + manifest_path.string() + ": " + e.what());
  }

  const auto arrays = ndiff::load_arrays(checkpoint_path);
  CaireModel model(fm.model);
  model.register_params(fm.params);
  ndiff::NamedArrays params;
  for (const auto& [n, a] : arrays)
    if (n.rfind("param/", 0) == 0) params.emplace_back(n.substr(6), a);
  ndiff::restore_params(fm.params, params);

  const auto& mean = find_array(arrays, "summary/mean_embedding");
  fm.summary.mean_embedding.assign(mean.values().begin(), mean.values().end());
  if (fm.summary.mean_embedding.size() != fm.model.d_a) throw ShapeError("cohort summary has the wrong dimension");
  fm.summary.n_patients = static_cast<std::size_t>(find_array(arrays, "summary/n_patients")[0]);
  if (has_array(arrays, "summary/attention_embeddings")) {
    const auto& emb = find_array(arrays, "summary/attention_embeddings");
    const auto& lg = find_array(arrays, "summary/attention_log_mean_g");
    for (std::size_t i = 0; i < emb.dim(0); ++i) {
      fm.summary.attention_embeddings.emplace_back(emb.values().begin() + static_cast<std::ptrdiff_t>(i * emb.dim(1)),
                                                   emb.values().begin() + static_cast<std::ptrdiff_t>((i + 1) * emb.dim(1)));
      fm.summary.attention_log_mean_g.push_back(lg[i]);
    }
  }
  if (has_array(arrays, "patients/rho")) {
    const auto& rho = find_array(arrays, "patients/rho");
    const auto& beta = find_array(arrays, "patients/beta");
    for (std::size_t i = 0; i < rho.dim(0); ++i) {
      models::FitnessRepresentation r;
      for (std::size_t k = 0; k < rho.dim(1); ++k) r.rho.push_back(rho(i, k));
      r.beta = beta[i];
      fm.train_representations.push_back(std::move(r));
    }
  }
  fm.log = log_from_array(find_array(arrays, "log"));
  return fm;
}

std::vector<std::size_t> stratified_pick(std::span<const double> outcomes, std::size_t count, seqcore::Rng& rng) {
  const std::size_t n = outcomes.size();
  if (count > n) throw ConfigError("cannot pick more patients than exist");
  const std::size_t n_strata = std::min<std::size_t>(3, std::max<std::size_t>(n, 1));
  const auto bin = seqcore::outcome_strata(outcomes, n_strata);
  std::vector<std::vector<std::size_t>> members(n_strata);
  for (std::size_t i = 0; i < n; ++i) members[bin[i]].push_back(i);
  std::vector<std::size_t> sizes;
  for (auto& m : members) {
    for (std::size_t k = m.size(); k > 1; --k) std::swap(m[k - 1], m[rng.index(k)]);
    sizes.push_back(m.size());
  }
  const auto counts = seqcore::apportion(count, sizes);
  std::vector<std::size_t> out;
  for (std::size_t s = 0; s < n_strata; ++s) out.insert(out.end(), members[s].begin(), members[s].begin() + static_cast<std::ptrdiff_t>(counts[s]));
  std::sort(out.begin(), out.end());
  return out;
}

FoldPlan cv_folds(std::span<const double> outcomes, std::size_t folds, std::size_t repeats, std::uint64_t seed) {
  const std::size_t n = outcomes.size();
  if (folds < 2) throw ConfigError("at least 2 folds are needed");
  if (repeats == 0) throw ConfigError("at least 1 repeat is needed");
  if (n < folds) throw ConfigError("fewer patients (" + std::to_string(n) + ") than folds (" + std::to_string(folds) + ")");
  FoldPlan plan;
  const auto bin = seqcore::outcome_strata(outcomes, 3);
  std::vector<std::vector<std::size_t>> groups(3);
  for (std::size_t i = 0; i < n; ++i) groups[bin[i]].push_back(i);
  groups.erase(std::remove_if(groups.begin(), groups.end(), [](const auto& g) { return g.empty(); }), groups.end());
  for (;;) {
    if (groups.size() < 2) break;
    auto small = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.size() < folds; });
    if (small == groups.end()) break;
    const std::size_t k = static_cast<std::size_t>(small - groups.begin());
    const std::size_t into = k + 1 < groups.size() ? k + 1 : k - 1;
    plan.warnings.push_back("outcome stratum with " + std::to_string(small->size()) + " patients is smaller than " +
                            std::to_string(folds) + " folds; merged with a neighbouring stratum");
    auto& target = groups[into];
    target.insert(target.end(), small->begin(), small->end());
    std::sort(target.begin(), target.end());
    groups.erase(small);
  }
  const seqcore::Rng base = seqcore::Rng(seed).split(0x666f6c64);  // "fold"
  for (std::size_t r = 0; r < repeats; ++r) {
    seqcore::Rng rr = base.split(r);
    std::vector<std::size_t> fold(n, 0);
    std::size_t counter = 0;
    for (auto g : groups) {
      for (std::size_t k = g.size(); k > 1; --k) std::swap(g[k - 1], g[rr.index(k)]);
      for (std::size_t i : g) fold[i] = counter++ % folds;
    }
    plan.fold_of.push_back(std::move(fold));
  }
  return plan;
}

Ensemble train_ensemble(const CohortDataset& data, const models::ModelConfig& model_cfg, const TrainConfig& cfg,
                        std::size_t folds, std::size_t repeats) {
  std::vector<double> y;
  for (const auto& r : data.repertoires) y.push_back(r.outcome());
  const auto plan = cv_folds(y, folds, repeats, cfg.seed);
  Ensemble ens;
  ens.warnings = plan.warnings;
  const seqcore::Rng seeds = seqcore::Rng(cfg.seed).split(0x656e73);  // "ens"
  for (std::size_t r = 0; r < repeats; ++r)
    for (std::size_t f = 0; f < folds; ++f) {
      std::vector<std::size_t> held, rest;
      for (std::size_t i = 0; i < y.size(); ++i) (plan.fold_of[r][i] == f ? held : rest).push_back(i);
      seqcore::Rng member = seeds.split(r * folds + f);
      std::vector<double> rest_y;
      for (std::size_t i : rest) rest_y.push_back(y[i]);
      const auto n_val = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::floor(cfg.val_fraction * static_cast<double>(rest.size()) + 1e-9)));
      const auto val_pos = stratified_pick(rest_y, n_val, member);
      PatientSplit split;
      std::vector<bool> is_val(rest.size(), false);
      for (std::size_t p : val_pos) is_val[p] = true;
      for (std::size_t k = 0; k < rest.size(); ++k) (is_val[k] ? split.validation : split.train).push_back(rest[k]);
      TrainConfig member_cfg = cfg;
      member_cfg.seed = member.next_u64();
      ens.models.push_back(train(data, split, model_cfg, member_cfg));
      ens.held_out.push_back(std::move(held));
    }
  return ens;
}

}  // namespace caire::train
