#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <ostream>
#include <set>

#include "caire/effects/effects.hpp"
#include "caire/evalkit/evalkit.hpp"
#include "caire/pipeline/pipeline.hpp"
#include "caire/seqcore/cohort_io.hpp"
#include "caire/train/trainer.hpp"

namespace caire::pipeline {

namespace fs = std::filesystem;

namespace {

fs::path output_dir(const Settings& s) {
  const fs::path out = s.required_path("out");
  fs::create_directories(out);
  return out;
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

std::string member_name(std::size_t k) {
  std::string n = std::to_string(k);
  return "model_" + std::string(n.size() < 2 ? 2 - n.size() : 0, '0') + n;
}

struct Member {
  train::FittedModel fit;
  std::set<std::string> seen;  // patients used for training or validation
};

struct LoadedModel {
  std::string name;
  std::vector<Member> members;
  std::vector<fs::path> files;
};

LoadedModel load_model_dir(const fs::path& dir) {
  const fs::path manifest = dir / "manifest.json";
  if (!fs::exists(manifest)) throw ConfigError("no model manifest in " + dir.string());
  const auto j = read_json(manifest);
  if (!j.contains("members") || !j["members"].is_array() || j["members"].empty())
    throw ConfigError(dir.string() + " holds no trained model (interrupted run?)");
  LoadedModel m;
  for (const auto& e : j["members"]) {
    const fs::path ckpt = dir / e.at("checkpoint").get<std::string>();
    const fs::path json = dir / e.at("model").get<std::string>();
    Member mem{train::load_fitted(ckpt, json), {}};
    mem.seen.insert(mem.fit.train_patients.begin(), mem.fit.train_patients.end());
    mem.seen.insert(mem.fit.validation_patients.begin(), mem.fit.validation_patients.end());
    m.files.push_back(ckpt);
    m.files.push_back(json);
    m.members.push_back(std::move(mem));
  }
  m.name = std::string(models::to_string(m.members.front().fit.model.variant));
  return m;
}

std::vector<std::unique_ptr<effects::EffectModel>> scorers(const LoadedModel& m) {
  std::vector<std::unique_ptr<effects::EffectModel>> out;
  for (const auto& mem : m.members) out.push_back(std::make_unique<effects::EffectModel>(mem.fit));
  return out;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  for (auto f : seqcore::split_fields(s, ','))
    if (!f.empty()) out.emplace_back(f);
  return out;
}

void write_histogram(const std::vector<double>& values, std::size_t bins, const fs::path& path) {
  if (bins == 0) throw UsageError("bins must be at least 1");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (values.empty()) lo = hi = 0.0;
  if (hi == lo) {
    lo -= 0.5;
    hi += 0.5;
  }
  std::vector<std::size_t> counts(bins, 0);
  const double width = (hi - lo) / static_cast<double>(bins);
  for (double v : values) ++counts[std::min(bins - 1, static_cast<std::size_t>((v - lo) / width))];
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "bin_lo,bin_hi,count\n";
  for (std::size_t b = 0; b < bins; ++b)
    out << seqcore::format_double(lo + width * static_cast<double>(b)) << ','
        << seqcore::format_double(b + 1 == bins ? hi : lo + width * static_cast<double>(b + 1)) << ',' << counts[b]
        << '\n';
}

std::vector<fs::path> report_outputs(const fs::path& in, const fs::path& out, std::vector<fs::path> files) {
  const auto svgs = render_report(in, out);
  files.insert(files.end(), svgs.begin(), svgs.end());
  return files;
}

}  // namespace

CohortFiles load_cohort_dir(const fs::path& dir) {
  CohortFiles c;
  seqcore::SplitConfig split;
  const fs::path manifest = dir / "manifest.json";
  if (fs::exists(manifest)) {
    const auto j = read_json(manifest);
    if (j.contains("split_seed")) split.seed = j["split_seed"].get<std::uint64_t>();
  }
  const fs::path reps = dir / "repertoires.tsv", outcomes = dir / "outcomes.csv";
  if (!fs::exists(reps) || !fs::exists(outcomes))
    throw ConfigError("cohort directory " + dir.string() + " needs repertoires.tsv and outcomes.csv");
  c.dataset = seqcore::load_cohort(reps, outcomes, split);
  c.inputs = {reps, outcomes};
  const fs::path truth = dir / "truth.csv", motifs = dir / "motifs.json";
  if (fs::exists(truth) && fs::exists(motifs)) {
    c.truth = simsynth::read_ground_truth(truth, motifs);
    c.inputs.push_back(truth);
    c.inputs.push_back(motifs);
  }
  return c;
}

void cmd_simulate(const Settings& s, std::ostream& log) {
  simsynth::SimConfig cfg;
  cfg.n_patients = s.count("n_patients");
  cfg.m_mature = s.count("m_mature");
  cfg.m_pool = s.count("m_pool");
  cfg.b_preselect = s.count("b_preselect");
  cfg.eta = s.real("eta");
  cfg.p_zeta = s.real("p_zeta");
  cfg.p_u = s.real("p_u");
  cfg.fitness_u = s.real("fitness_u");
  cfg.fitness_base = s.real("fitness_base");
  cfg.gamma_a = s.real("gamma_a");
  cfg.gamma_u = s.real("gamma_u");
  cfg.gamma_0 = s.real("gamma_0");
  cfg.tau_y = s.real("tau_y");
  cfg.motif_position = s.count("motif_position");
  cfg.seed = s.u64("seed");
  cfg.validate();
  const fs::path out = output_dir(s);

  std::vector<fs::path> inputs;
  std::unique_ptr<simsynth::BaseSampler> sampler;
  if (s.empty("corpus")) {
    sampler = std::make_unique<simsynth::SyntheticSampler>();
  } else {
    sampler = std::make_unique<simsynth::CorpusSampler>(simsynth::CorpusSampler::from_file(s.path("corpus")));
    inputs.push_back(s.path("corpus"));
  }
  const auto sim = simsynth::simulate_cohort(cfg, *sampler, seqcore::Rng(cfg.seed));
  for (const auto& w : sim.truth.warnings) log << "warning: " << w << '\n';

  const fs::path reps = out / "repertoires.tsv", outcomes = out / "outcomes.csv";
  const fs::path truth = out / "truth.csv", motifs = out / "motifs.json";
  seqcore::write_cohort(sim.dataset.repertoires, reps, outcomes);
  simsynth::write_ground_truth(sim.truth, truth, motifs);
  write_manifest(out, s, inputs, {reps, outcomes, truth, motifs},
                 {{"split_seed", cfg.seed}, {"sampler", sampler->describe()}});
  log << "simulated " << sim.dataset.repertoires.size() << " patients into " << out.string() << '\n';
}

void cmd_train(const Settings& s, std::ostream& log) {
  const auto cohort = load_cohort_dir(s.required_path("cohort"));
  const auto& data = cohort.dataset;
  const fs::path out = output_dir(s);

  auto mc = models::ModelConfig::for_variant(models::variant_from_string(s.get("variant")), data.l_max());
  if (!s.empty("d_a")) mc.d_a = s.count("d_a");
  if (!s.empty("d_r")) mc.d_r = s.count("d_r");
  if (!s.empty("kernel")) mc.kernel = s.count("kernel");
  if (!s.empty("encoding")) mc.encoding = seqcore::encoding_mode_from_string(s.get("encoding"));
  mc.validate();

  train::TrainConfig cfg;
  for (const auto& [k, v] : train::TrainConfig{}.to_key_values()) cfg.set(k, s.get(k));
  cfg.validate();

  std::vector<fs::path> inputs = cohort.inputs, outputs;
  nlohmann::ordered_json members = nlohmann::ordered_json::array();
  nlohmann::ordered_json extra;

  const std::string mode = s.get("mode");
  if (mode == "single") {
    train::Trainer trainer(data, train::split_from_dataset(data), mc, cfg);
    auto state = trainer.initial_state();
    if (!s.empty("resume")) {
      state_from_arrays(state, ndiff::load_arrays(s.path("resume")));
      inputs.push_back(s.path("resume"));
      log << "resuming at step " << state.step << '\n';
    }
    const std::size_t stop = s.count("stop_after");
    trainer.run(state, stop == 0 ? cfg.total_steps : stop);
    const fs::path state_path = out / "state.ckpt", log_path = out / "log.csv";
    ndiff::save_arrays(state_path, train::state_to_arrays(state));
    train::write_training_log(state.log, log_path);
    outputs = {state_path, log_path};
    extra["step"] = state.step;
    if (state.step == cfg.total_steps) {
      const auto fm = trainer.finish(state);
      const fs::path ckpt = out / "model.ckpt", json = out / "model.json";
      train::save_fitted(fm, ckpt, json);
      outputs.push_back(ckpt);
      outputs.push_back(json);
      members.push_back({{"checkpoint", "model.ckpt"}, {"model", "model.json"}});
      log << "trained " << models::to_string(mc.variant) << ": best validation score "
          << seqcore::format_double(fm.best_score) << " at step " << fm.best_step << '\n';
    } else {
      log << "stopped at step " << state.step << " of " << cfg.total_steps << "; resume from " << state_path.string()
          << '\n';
    }
  } else if (mode == "ensemble") {
    const auto ens = train::train_ensemble(data, mc, cfg, s.count("folds"), s.count("repeats"));
    for (const auto& w : ens.warnings) log << "warning: " << w << '\n';
    for (std::size_t k = 0; k < ens.models.size(); ++k) {
      const std::string name = member_name(k);
      const fs::path ckpt = out / (name + ".ckpt"), json = out / (name + ".json"), lg = out / (name + "_log.csv");
      train::save_fitted(ens.models[k], ckpt, json);
      train::write_training_log(ens.models[k].log, lg);
      outputs.insert(outputs.end(), {ckpt, json, lg});
      nlohmann::ordered_json held = nlohmann::ordered_json::array();
      for (std::size_t i : ens.held_out[k]) held.push_back(data.repertoires[i].patient_id());
      members.push_back({{"checkpoint", name + ".ckpt"}, {"model", name + ".json"}, {"held_out", held}});
    }
    log << "trained " << ens.models.size() << " ensemble members of " << models::to_string(mc.variant) << '\n';
  } else {
    throw UsageError("mode must be single or ensemble, got '" + mode + "'");
  }
  extra["members"] = members;
  write_manifest(out, s, inputs, outputs, extra);
}

void cmd_estimate(const Settings& s, std::ostream& log) {
  const fs::path model_dir = s.required_path("model"), seq_path = s.required_path("sequences");
  const double epsilon = s.real("epsilon");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw UsageError("epsilon must lie in [0, 1]");
  const auto model = load_model_dir(model_dir);
  const auto lines = seqcore::read_sequence_lines(seq_path);
  const fs::path out = output_dir(s);
  const auto ens = scorers(model);

  std::vector<effects::EffectEstimate> rows;
  std::size_t failed = 0;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& line : lines) {
    effects::EffectEstimate e;
    e.epsilon = epsilon;
    try {
      e.sequence = seqcore::AminoSequence(line);
      if (ens.size() == 1) {
        e.ate = e.mu_hat = ens.front()->ate(e.sequence, epsilon);
        e.per_model = {e.ate};
        e.sigma_hat = e.p_tilde = nan;
      } else {
        e = effects::ensemble_ate(ens, e.sequence, epsilon);
      }
    } catch (const Error& ex) {
      e = {};
      e.ate = e.mu_hat = e.sigma_hat = e.p_tilde = nan;
      e.error = ex.what();
      e.input = line;
      ++failed;
    }
    rows.push_back(std::move(e));
  }
  const fs::path csv = out / "effects.csv";
  effects::write_effects_csv(rows, csv);
  std::vector<fs::path> inputs{seq_path};
  inputs.insert(inputs.end(), model.files.begin(), model.files.end());
  write_manifest(out, s, inputs, {csv});
  log << "scored " << rows.size() - failed << " of " << rows.size() << " sequences with " << ens.size() << " model(s)\n";
  if (!rows.empty() && failed == rows.size()) throw Error("no input sequence could be scored");
}

void cmd_evaluate(const Settings& s, std::ostream& log) {
  const auto model_dirs = split_list(s.get("models"));
  if (model_dirs.empty()) throw UsageError("evaluate needs --models (comma-separated model directories)");
  const double epsilon = s.real("epsilon");
  const std::string mode = s.get("mode");
  if (mode != "simulated" && mode != "generic") throw UsageError("mode must be simulated or generic");

  std::optional<CohortFiles> cohort;
  if (mode == "simulated") {
    cohort = load_cohort_dir(s.required_path("cohort"));
    if (!cohort->truth)
      throw ConfigError("simulated evaluation needs ground truth (truth.csv and motifs.json) in " + s.get("cohort"));
  } else {
    s.required_path("binders");
    s.required_path("unlabeled");
  }
  const fs::path out = output_dir(s);

  std::vector<LoadedModel> loaded;
  std::vector<fs::path> inputs;
  std::map<std::string, int> name_count;
  for (const auto& d : model_dirs) {
    loaded.push_back(load_model_dir(d));
    auto& m = loaded.back();
    if (name_count[m.name]++ > 0) m.name += "_" + std::to_string(name_count[m.name]);
    inputs.insert(inputs.end(), m.files.begin(), m.files.end());
  }

  std::vector<evalkit::MetricRow> rows;
  std::vector<fs::path> outputs;
  std::vector<evalkit::MotifPrAuc> per_method;
  for (const auto& m : loaded) {
    const auto ens = scorers(m);
    std::vector<double> all_scores;
    if (mode == "simulated") {
      // Each patient is scored only by members that never saw it.
      std::map<const seqcore::WeightedSet*, std::vector<double>> cache;
      std::vector<const seqcore::Repertoire*> heldout;
      for (const auto& rep : cohort->dataset.repertoires) {
        std::vector<std::size_t> eligible;
        for (std::size_t k = 0; k < m.members.size(); ++k)
          if (!m.members[k].seen.count(rep.patient_id())) eligible.push_back(k);
        if (eligible.empty()) continue;
        heldout.push_back(&rep);
        auto& sc = cache[&rep.mature()];
        sc.assign(rep.mature().size(), 0.0);
        for (std::size_t k : eligible)
          for (std::size_t j = 0; j < sc.size(); ++j) sc[j] += ens[k]->ate(rep.mature().tokens()[j], epsilon);
        for (double& v : sc) v /= static_cast<double>(eligible.size());
        all_scores.insert(all_scores.end(), sc.begin(), sc.end());
      }
      if (heldout.empty()) throw ConfigError(m.name + ": every cohort patient was used in training");
      auto res = evalkit::per_patient_motif_prauc(
          heldout, *cohort->truth, [&](const seqcore::WeightedSet& set, std::size_t j) { return cache.at(&set)[j]; });
      for (const auto& w : res.warnings) log << "warning: " << m.name << ": " << w << '\n';
      rows.push_back({"pr_auc." + m.name, res.mean, res.std_error, res.per_patient.size()});
      log << m.name << ": mean per-patient PR-AUC " << seqcore::format_double(res.mean) << " over "
          << res.per_patient.size() << " patients\n";
      per_method.push_back(std::move(res));
    } else {
      auto score_file = [&](const fs::path& p) {
        std::vector<double> scores;
        std::size_t skipped = 0;
        for (const auto& line : seqcore::read_sequence_lines(p)) {
          try {
            const seqcore::AminoSequence x(line);
            double v = 0.0;
            for (const auto& e : ens) v += e->ate(x, epsilon);
            scores.push_back(v / static_cast<double>(ens.size()));
          } catch (const Error&) {
            ++skipped;
          }
        }
        if (skipped) log << "warning: " << m.name << ": skipped " << skipped << " unscorable lines in " << p.string() << '\n';
        return scores;
      };
      const auto pos = score_file(s.path("binders")), unl = score_file(s.path("unlabeled"));
      const auto auc = evalkit::roc_auc_unlabeled(pos, unl);
      rows.push_back({"roc_auc_unlabeled." + m.name, auc.auc, auc.std_error, std::min(pos.size(), unl.size())});
      log << m.name << ": binder-vs-unlabeled AUC " << seqcore::format_double(auc.auc) << '\n';
      all_scores = unl;
    }
    const fs::path hist = out / ("hist_" + m.name + ".csv");
    write_histogram(all_scores, s.count("bins"), hist);
    outputs.push_back(hist);
  }

  if (mode == "simulated") {
    seqcore::Rng rng(s.u64("seed"));
    for (std::size_t b = 1; b < per_method.size(); ++b) {
      const auto& x = per_method[0].per_patient;
      const auto& y = per_method[b].per_patient;
      if (x.size() < 2 || y.size() < 2) continue;
      const double p = evalkit::permutation_ttest(x, y, s.count("n_perm"), rng);
      rows.push_back({"perm_p." + loaded[0].name + "_vs_" + loaded[b].name, p,
                      std::numeric_limits<double>::quiet_NaN(), s.count("n_perm")});
    }
  }
  const fs::path metrics = out / "metrics.csv";
  evalkit::write_metrics_csv(rows, metrics);
  outputs.insert(outputs.begin(), metrics);
  if (cohort) inputs.insert(inputs.end(), cohort->inputs.begin(), cohort->inputs.end());
  if (mode == "generic") inputs.insert(inputs.end(), {s.path("binders"), s.path("unlabeled")});
  outputs = report_outputs(out, out / "report", outputs);
  write_manifest(out, s, inputs, outputs);
}

void cmd_report(const Settings& s, std::ostream& log) {
  const fs::path in = s.required_path("input");
  const fs::path out = output_dir(s);
  const auto files = render_report(in, out);
  std::vector<fs::path> inputs{in / "metrics.csv"};
  for (const auto& e : fs::directory_iterator(in))
    if (e.path().filename().string().rfind("hist_", 0) == 0 && e.path().extension() == ".csv") inputs.push_back(e.path());
  std::sort(inputs.begin() + 1, inputs.end());
  write_manifest(out, s, inputs, files);
  log << "wrote " << files.size() << " SVG files to " << out.string() << '\n';
}

int run_command(const Settings& s, std::ostream& log, std::ostream& err) {
  try {
    switch (s.command()) {
      case Command::kSimulate: cmd_simulate(s, log); break;
      case Command::kTrain: cmd_train(s, log); break;
      case Command::kEstimate: cmd_estimate(s, log); break;
      case Command::kEvaluate: cmd_evaluate(s, log); break;
      case Command::kReport: cmd_report(s, log); break;
    }
    return 0;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace caire::pipeline
