#include <doctest.h>

#include <cmath>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "caire/effects/effects.hpp"
#include "caire/pipeline/pipeline.hpp"
#include "caire/seqcore/cohort_io.hpp"
#include "caire/train/trainer.hpp"
#include "support.hpp"

using namespace caire;
using namespace caire::pipeline;
using seqcore::AminoSequence;
namespace fs = std::filesystem;

namespace {

int run(Command c, const std::map<std::string, std::string>& flags, std::string* err_text = nullptr) {
  Settings s(c);
  for (const auto& [k, v] : flags) s.set(k, v, Provenance::kFlag);
  std::ostringstream log, err;
  const int rc = run_command(s, log, err);
  if (err_text) *err_text = err.str();
  return rc;
}

void simulate(const fs::path& out, const std::string& seed = "5") {
  REQUIRE(run(Command::kSimulate, {{"out", out.string()},
                                   {"n_patients", "24"},
                                   {"m_mature", "40"},
                                   {"b_preselect", "40"},
                                   {"eta", "0.1"},
                                   {"seed", seed}}) == 0);
}

std::map<std::string, std::string> small_train(const fs::path& cohort, const fs::path& out) {
  return {{"cohort", cohort.string()}, {"out", out.string()},       {"total_steps", "12"},
          {"eval_period", "4"},        {"batch_patients", "4"},     {"batch_seqs", "16"}};
}

std::vector<std::string> csv_lines(const fs::path& p) {
  std::istringstream in(testing::read_file(p));
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::vector<std::string> fields(const std::string& line) {
  std::vector<std::string> out;
  for (auto f : seqcore::split_fields(line, ',')) out.emplace_back(f);
  return out;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("sha256 of known vectors") {
  testing::TempDir dir("sha");
  testing::write_file(dir / "abc", "abc");
  testing::write_file(dir / "empty", "");
  CHECK(sha256_file(dir / "abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_file(dir / "empty") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("settings precedence and provenance") {
  testing::TempDir dir("settings");
  testing::write_file(dir / "cfg.txt", "# comment\nepsilon = 0.3\nout = from_file\n");
  Settings s(Command::kEstimate);
  CHECK(s.get("epsilon") == "0.1");
  CHECK(s.source("epsilon") == Provenance::kDefault);
  s.apply_file(dir / "cfg.txt");
  s.set("out", "from_flag", Provenance::kFlag);
  CHECK(s.real("epsilon") == doctest::Approx(0.3));
  CHECK(s.source("epsilon") == Provenance::kFile);
  CHECK(s.get("out") == "from_flag");
  CHECK(s.source("out") == Provenance::kFlag);
  CHECK(s.to_json()["out"]["source"] == "flag");

  CHECK_THROWS_AS(s.set("bogus", "1", Provenance::kFlag), UsageError);
  testing::write_file(dir / "bad.txt", "n_perm = 5\n");
  CHECK_THROWS_AS(s.apply_file(dir / "bad.txt"), UsageError);
  s.set("epsilon", "abc", Provenance::kFlag);
  CHECK_THROWS_AS(s.real("epsilon"), UsageError);
  Settings sim(Command::kSimulate);
  sim.set("seed", "-3", Provenance::kFlag);
  CHECK_THROWS_AS(sim.u64("seed"), UsageError);
}

TEST_CASE("missing required paths and bad values exit with 2") {
  testing::TempDir dir("usage");
  std::string err;
  CHECK(run(Command::kEstimate, {}, &err) == 2);
  CHECK(err.find("--model") != std::string::npos);
  CHECK(run(Command::kSimulate, {{"out", (dir / "s").string()}, {"n_patients", "many"}}, &err) == 2);
  CHECK(err.find("n_patients") != std::string::npos);
}

TEST_CASE("simulate is deterministic and records digests") {
  testing::TempDir dir("sim");
  simulate(dir / "a");
  simulate(dir / "b");
  simulate(dir / "c", "6");
  for (const char* f : {"repertoires.tsv", "outcomes.csv", "truth.csv", "motifs.json"}) {
    CHECK(testing::read_file(dir / "a" / f) == testing::read_file(dir / "b" / f));
  }
  CHECK(testing::read_file(dir / "a/repertoires.tsv") != testing::read_file(dir / "c/repertoires.tsv"));

  const auto m = nlohmann::json::parse(testing::read_file(dir / "a/manifest.json"));
  CHECK(m["command"] == "simulate");
  CHECK(m["settings"]["n_patients"]["value"] == "24");
  CHECK(m["settings"]["n_patients"]["source"] == "flag");
  CHECK(m["settings"]["gamma_u"]["source"] == "default");
  REQUIRE(m["outputs"].size() == 4);
  for (const auto& o : m["outputs"])
    CHECK(o["sha256"] == sha256_file(dir / "a" / o["path"].get<std::string>()));

  const auto cohort = load_cohort_dir(dir / "a");
  CHECK(cohort.dataset.repertoires.size() == 24);
  REQUIRE(cohort.truth.has_value());
  CHECK(cohort.truth->patients.size() == 24);
}

TEST_CASE("train single run writes a loadable model and an uncorrected model has no fitness or propensity") {
  testing::TempDir dir("train");
  simulate(dir / "sim");
  auto flags = small_train(dir / "sim", dir / "caire");
  REQUIRE(run(Command::kTrain, flags) == 0);
  const auto fit = train::load_fitted(dir / "caire/model.ckpt", dir / "caire/model.json");
  CHECK(fit.params.contains("gamma_r"));
  CHECK(fit.params.contains("log_tau_e"));

  flags = small_train(dir / "sim", dir / "unc");
  flags["variant"] = "Uncorrected";
  REQUIRE(run(Command::kTrain, flags) == 0);
  const auto j = nlohmann::json::parse(testing::read_file(dir / "unc/model.json"));
  for (const auto& name : j["parameters"]) {
    const auto n = name.get<std::string>();
    CHECK_MESSAGE(n.rfind("phi", 0) != 0, n);
    CHECK_MESSAGE(n.rfind("enc", 0) != 0, n);
    CHECK(n != "gamma_r");
    CHECK(n != "log_tau_e");
  }
  CHECK(j["parameters"].size() == 5);
}

TEST_CASE("interrupted training resumes to the uninterrupted result") {
  testing::TempDir dir("resume");
  simulate(dir / "sim");
  REQUIRE(run(Command::kTrain, small_train(dir / "sim", dir / "full")) == 0);

  auto first = small_train(dir / "sim", dir / "part");
  first["stop_after"] = "6";
  REQUIRE(run(Command::kTrain, first) == 0);
  CHECK_FALSE(fs::exists(dir / "part/model.ckpt"));
  // An interrupted run has no model to score with.
  testing::write_file(dir / "one.txt", "CASSLGQETQYF\n");
  CHECK(run(Command::kEstimate, {{"model", (dir / "part").string()},
                                 {"sequences", (dir / "one.txt").string()},
                                 {"out", (dir / "e").string()}}) == 2);

  auto second = small_train(dir / "sim", dir / "resumed");
  second["resume"] = (dir / "part/state.ckpt").string();
  REQUIRE(run(Command::kTrain, second) == 0);
  CHECK(testing::read_file(dir / "full/model.ckpt") == testing::read_file(dir / "resumed/model.ckpt"));
  CHECK(testing::read_file(dir / "full/log.csv") == testing::read_file(dir / "resumed/log.csv"));
}

TEST_CASE("ensemble mode writes one checkpoint per fold and repeat") {
  testing::TempDir dir("ens");
  simulate(dir / "sim");
  auto flags = small_train(dir / "sim", dir / "ens");
  flags["mode"] = "ensemble";
  flags["variant"] = "Uncorrected";
  flags["total_steps"] = "2";
  flags["eval_period"] = "2";
  REQUIRE(run(Command::kTrain, flags) == 0);
  std::size_t ckpts = 0;
  for (const auto& e : fs::directory_iterator(dir / "ens"))
    if (e.path().extension() == ".ckpt") ++ckpts;
  CHECK(ckpts == 24);
  const auto m = nlohmann::json::parse(testing::read_file(dir / "ens/manifest.json"));
  REQUIRE(m["members"].size() == 24);
  std::map<std::string, int> held_out;
  for (const auto& mem : m["members"])
    for (const auto& id : mem["held_out"]) ++held_out[id.get<std::string>()];
  CHECK(held_out.size() == 24);
  for (const auto& [id, n] : held_out) CHECK(n == 3);
}

TEST_CASE("estimate: empty input, duplicates, epsilon scaling and failures") {
  testing::TempDir dir("estimate");
  simulate(dir / "sim");
  REQUIRE(run(Command::kTrain, small_train(dir / "sim", dir / "model")) == 0);
  const std::string model = (dir / "model").string();

  testing::write_file(dir / "empty.txt", "");
  REQUIRE(run(Command::kEstimate, {{"model", model}, {"sequences", (dir / "empty.txt").string()},
                                   {"out", (dir / "e0").string()}}) == 0);
  CHECK(testing::read_file(dir / "e0/effects.csv") == "sequence,ate,mu_hat,sigma_hat,p_tilde,error\n");

  testing::write_file(dir / "seqs.txt", "CASSLGQETQYF\nCASS?Q\nCASSLGQETQYF\n");
  REQUIRE(run(Command::kEstimate, {{"model", model}, {"sequences", (dir / "seqs.txt").string()},
                                   {"out", (dir / "e1").string()}, {"epsilon", "0.2"}}) == 0);
  REQUIRE(run(Command::kEstimate, {{"model", model}, {"sequences", (dir / "seqs.txt").string()},
                                   {"out", (dir / "e2").string()}, {"epsilon", "0.1"}}) == 0);
  const auto a = csv_lines(dir / "e1/effects.csv"), b = csv_lines(dir / "e2/effects.csv");
  REQUIRE(a.size() == 4);
  CHECK(a[1] == a[3]);
  CHECK(fields(a[2])[0] == "CASS?Q");
  CHECK_FALSE(fields(a[2])[5].empty());
  CHECK(fields(a[1])[5].empty());
  // The plug-in effect is linear in epsilon.
  const double ate_a = seqcore::parse_double(fields(a[1])[1]), ate_b = seqcore::parse_double(fields(b[1])[1]);
  CHECK(ate_a != 0.0);
  CHECK(ate_b == doctest::Approx(ate_a / 2).epsilon(1e-12));

  const auto m = nlohmann::json::parse(testing::read_file(dir / "e1/manifest.json"));
  CHECK(m["settings"]["epsilon"]["value"] == "0.2");
  CHECK(m["inputs"].size() >= 3);

  testing::write_file(dir / "bad.txt", "CASS1\nXYZ\n");
  std::string err;
  CHECK(run(Command::kEstimate, {{"model", model}, {"sequences", (dir / "bad.txt").string()},
                                 {"out", (dir / "e3").string()}}, &err) == 1);
  CHECK_FALSE(err.empty());
}

TEST_CASE("evaluate needs ground truth on simulated data; report reruns are byte-identical") {
  testing::TempDir dir("evaluate");
  simulate(dir / "sim");
  auto flags = small_train(dir / "sim", dir / "caire");
  flags["mode"] = "ensemble";
  flags["folds"] = "3";
  flags["repeats"] = "1";
  REQUIRE(run(Command::kTrain, flags) == 0);
  flags["out"] = (dir / "unc").string();
  flags["variant"] = "Uncorrected";
  REQUIRE(run(Command::kTrain, flags) == 0);

  const std::string models = (dir / "caire").string() + "," + (dir / "unc").string();
  REQUIRE(run(Command::kEvaluate, {{"models", models}, {"cohort", (dir / "sim").string()},
                                   {"out", (dir / "ev").string()}, {"n_perm", "99"}}) == 0);
  const auto rows = csv_lines(dir / "ev/metrics.csv");
  REQUIRE(rows.size() == 4);
  CHECK(rows[0] == "metric,value,stderr,n");
  CHECK(fields(rows[1])[0] == "pr_auc.CAIRE");
  CHECK(fields(rows[2])[0] == "pr_auc.Uncorrected");
  CHECK(fields(rows[3])[0] == "perm_p.CAIRE_vs_Uncorrected");
  for (const char* f : {"hist_CAIRE.csv", "hist_Uncorrected.csv", "report/metrics.svg", "report/hist_CAIRE.svg"})
    CHECK_MESSAGE(fs::exists(dir / "ev" / f), f);

  REQUIRE(run(Command::kReport, {{"input", (dir / "ev").string()}, {"out", (dir / "r1").string()}}) == 0);
  REQUIRE(run(Command::kReport, {{"input", (dir / "ev").string()}, {"out", (dir / "r2").string()}}) == 0);
  for (const char* f : {"metrics.svg", "hist_CAIRE.svg", "hist_Uncorrected.svg"}) {
    CHECK(testing::read_file(dir / "r1" / f) == testing::read_file(dir / "r2" / f));
    CHECK(testing::read_file(dir / "r1" / f) == testing::read_file(dir / "ev/report" / f));
  }

  fs::remove(dir / "sim/truth.csv");
  std::string err;
  CHECK(run(Command::kEvaluate, {{"models", models}, {"cohort", (dir / "sim").string()},
                                 {"out", (dir / "ev2").string()}}, &err) == 2);
  CHECK(err.find("ground truth") != std::string::npos);
}

TEST_CASE("generic evaluation matches a pairwise AUC over direct effect estimates") {
  testing::TempDir dir("generic");
  simulate(dir / "sim");
  REQUIRE(run(Command::kTrain, small_train(dir / "sim", dir / "model")) == 0);
  testing::write_file(dir / "binders.txt", "CASSLGQETQYF\nCASSPGTGNYGYTF\nCASRDRGNQPQHF\n");
  testing::write_file(dir / "unlabeled.txt", "CASSIRSSYEQYF\nCASSQDRGYGYTF\nCAS!\nCATSDLNTGELFF\nCASSLEGQGAEAFF\n");
  REQUIRE(run(Command::kEvaluate, {{"models", (dir / "model").string()}, {"mode", "generic"},
                                   {"binders", (dir / "binders.txt").string()},
                                   {"unlabeled", (dir / "unlabeled.txt").string()}, {"out", (dir / "ev").string()}}) == 0);
  const auto rows = csv_lines(dir / "ev/metrics.csv");
  REQUIRE(rows.size() == 2);
  const auto f = fields(rows[1]);
  CHECK(f[0] == "roc_auc_unlabeled.CAIRE");

  const auto fit = train::load_fitted(dir / "model/model.ckpt", dir / "model/model.json");
  const effects::EffectModel em(fit);
  std::vector<double> pos, unl;
  for (const char* x : {"CASSLGQETQYF", "CASSPGTGNYGYTF", "CASRDRGNQPQHF"}) pos.push_back(em.ate(AminoSequence(x), 0.01));
  for (const char* x : {"CASSIRSSYEQYF", "CASSQDRGYGYTF", "CATSDLNTGELFF", "CASSLEGQGAEAFF"})
    unl.push_back(em.ate(AminoSequence(x), 0.01));
  double wins = 0.0;
  for (double a : pos)
    for (double b : unl) wins += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
  CHECK(seqcore::parse_double(f[1]) == doctest::Approx(wins / 12.0).epsilon(1e-12));
  CHECK(f[3] == "3");

  std::string err;
  CHECK(run(Command::kEvaluate, {{"models", (dir / "model").string()}, {"mode", "generic"},
                                 {"out", (dir / "ev2").string()}}, &err) == 2);
  CHECK(err.find("--binders") != std::string::npos);
}

}  // TEST_SUITE
