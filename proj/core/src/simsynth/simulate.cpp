#include "caire/simsynth/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "caire/errors.hpp"
#include "caire/seqcore/cohort_io.hpp"

namespace caire::simsynth {

using seqcore::Rng;
using seqcore::WeightedSet;

namespace {

constexpr std::size_t kMaxRedraws = 1000;
constexpr std::size_t kSyntheticCorpusSize = 20000;
constexpr std::uint64_t kMotifStream = 0x6d6f746966ULL;
constexpr std::uint64_t kCorpusStream = 0x636f72707573ULL;

}  // namespace

CorpusSampler::CorpusSampler(std::vector<AminoSequence> corpus) : corpus_(std::move(corpus)) {
  if (corpus_.empty()) throw Error("base corpus is empty");
}

CorpusSampler CorpusSampler::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<AminoSequence> corpus;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!seqcore::is_valid_sequence(line))
      throw ParseError(path.string(), lineno, "invalid amino-acid sequence '" + line + "'");
    corpus.emplace_back(line);
  }
  return CorpusSampler(std::move(corpus));
}

AminoSequence CorpusSampler::draw(Rng& rng) const { return corpus_[rng.index(corpus_.size())]; }

std::vector<AminoSequence> CorpusSampler::reference_corpus(Rng&) const { return corpus_; }

std::string CorpusSampler::describe() const { return "corpus(" + std::to_string(corpus_.size()) + ")"; }

const std::array<double, seqcore::kNumResidues>& SyntheticSampler::background_frequencies() {
  // Percent composition of reviewed protein sequences, ACDEFGHIKLMNPQRSTVWY.
  static const std::array<double, seqcore::kNumResidues> freq = [] {
    std::array<double, seqcore::kNumResidues> f = {8.25, 1.37, 5.45, 6.75, 3.86, 7.07, 2.27, 5.96, 5.84, 9.66,
                                                   2.42, 4.06, 4.70, 3.93, 5.53, 6.56, 5.34, 6.87, 1.08, 2.92};
    double total = 0.0;
    for (double v : f) total += v;
    for (double& v : f) v /= total;
    return f;
  }();
  return freq;
}

SyntheticSampler::SyntheticSampler(std::size_t min_length, std::size_t max_length)
    : min_length_(min_length), max_length_(max_length) {
  if (min_length == 0 || max_length < min_length) throw ConfigError("synthetic sampler needs 0 < min <= max length");
  double acc = 0.0;
  const auto& f = background_frequencies();
  for (std::size_t i = 0; i < f.size(); ++i) cumulative_[i] = (acc += f[i]);
  cumulative_.back() = 1.0;
}

AminoSequence SyntheticSampler::draw(Rng& rng) const {
  const std::size_t len = min_length_ + rng.index(max_length_ - min_length_ + 1);
  std::string s(len, 'A');
  for (auto& c : s) {
    const double u = rng.uniform();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    c = seqcore::kAlphabet[std::min<std::size_t>(it - cumulative_.begin(), seqcore::kNumResidues - 1)];
  }
  return AminoSequence(std::move(s));
}

std::vector<AminoSequence> SyntheticSampler::reference_corpus(Rng& rng) const {
  std::vector<AminoSequence> out;
  out.reserve(kSyntheticCorpusSize);
  for (std::size_t i = 0; i < kSyntheticCorpusSize; ++i) out.push_back(draw(rng));
  return out;
}

std::string SyntheticSampler::describe() const {
  return "synthetic(" + std::to_string(min_length_) + "-" + std::to_string(max_length_) + ")";
}

WeightedSet apply_selection(std::vector<AminoSequence> pool,
                            const std::function<double(const AminoSequence&)>& fitness) {
  if (pool.empty()) throw Error("selection pool is empty");
  std::vector<double> w(pool.size());
  for (std::size_t j = 0; j < pool.size(); ++j) {
    w[j] = fitness(pool[j]);
    if (!(w[j] > 0.0) || !std::isfinite(w[j]))
      throw Error("fitness of " + pool[j].str() + " is " + std::to_string(w[j]) + "; it must be positive");
  }
  return WeightedSet(std::move(pool), std::move(w));
}

void SimConfig::validate() const {
  const auto prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0, 1]");
  };
  prob(p_zeta, "p_zeta");
  prob(p_u, "p_u");
  if (!(eta >= 0.0 && 2.0 * eta <= 1.0)) throw ConfigError("eta must lie in [0, 0.5]");
  if (n_patients == 0) throw ConfigError("n_patients must be positive");
  if (m_mature == 0) throw ConfigError("m_mature must be positive");
  if (b_preselect == 0) throw ConfigError("b_preselect must be positive");
  if (!(tau_y > 0.0)) throw ConfigError("tau_y must be positive");
}

const PatientTruth* GroundTruth::find(const std::string& patient_id) const noexcept {
  for (const auto& p : patients)
    if (p.patient_id == patient_id) return &p;
  return nullptr;
}

std::vector<int> causal_labels(const seqcore::Repertoire& rep, const GroundTruth& truth) {
  std::vector<int> out;
  out.reserve(rep.mature().size());
  for (const auto& s : rep.mature().sequences()) out.push_back(detect_motif(s, truth.causal) ? 1 : 0);
  return out;
}

AminoSequence draw_preselection(const BaseSampler& sampler, const MotifSpec& causal, const MotifSpec& confounded,
                                double eta, bool zeta, Rng& rng, Injection* injected) {
  const double c = rng.uniform();
  const MotifSpec* kappa = nullptr;
  Injection kind = Injection::kNone;
  if (c < eta) {
    kappa = &confounded;
    kind = Injection::kConfounded;
  } else if (zeta && c < 2.0 * eta) {
    kappa = &causal;
    kind = Injection::kCausal;
  }
  if (injected) *injected = kind;
  if (!kappa) return sampler.draw(rng);
  for (std::size_t attempt = 0; attempt < kMaxRedraws; ++attempt) {
    AminoSequence x = sampler.draw(rng);
    if (x.length() >= kappa->position + kappa->motif.length()) return inject_motif(x, *kappa);
  }
  throw Error("base sampler produced no sequence long enough for motif injection in " +
              std::to_string(kMaxRedraws) + " draws");
}

std::string patient_name(std::size_t index) {
  std::string digits = std::to_string(index);
  if (digits.size() < 4) digits.insert(0, 4 - digits.size(), '0');
  return "P" + digits;
}

SimResult simulate_cohort(const SimConfig& cfg, const BaseSampler& sampler, Rng rng) {
  cfg.validate();
  SimResult result;
  GroundTruth& truth = result.truth;

  Rng motif_rng = rng.split(kMotifStream);
  Rng corpus_rng = rng.split(kCorpusStream);
  const auto corpus = sampler.reference_corpus(corpus_rng);
  MotifChoice motifs = choose_motifs(corpus, motif_rng, cfg.motif_position);
  truth.causal = motifs.causal;
  truth.confounded = motifs.confounded;
  truth.eta = cfg.eta;
  truth.seed = cfg.seed;
  truth.warnings = std::move(motifs.warnings);

  std::size_t coincident = 0, unexposed = 0;
  std::vector<seqcore::Repertoire> reps;
  reps.reserve(cfg.n_patients);
  for (std::size_t i = 0; i < cfg.n_patients; ++i) {
    Rng prng = rng.split(i);
    PatientTruth pt;
    pt.patient_id = patient_name(i);
    pt.zeta = prng.bernoulli(cfg.p_zeta);
    pt.u = prng.bernoulli(cfg.p_u);

    const auto draw = [&] {
      Injection kind = Injection::kNone;
      AminoSequence x = draw_preselection(sampler, truth.causal, truth.confounded, cfg.eta, pt.zeta, prng, &kind);
      pt.injected_causal += kind == Injection::kCausal;
      pt.injected_confounded += kind == Injection::kConfounded;
      return x;
    };
    std::vector<AminoSequence> pre;
    pre.reserve(cfg.b_preselect);
    for (std::size_t j = 0; j < cfg.b_preselect; ++j) pre.push_back(draw());

    std::vector<AminoSequence> pool;
    pool.reserve(cfg.pool_size());
    for (std::size_t j = 0; j < cfg.pool_size(); ++j) pool.push_back(draw());

    const double log_r = cfg.fitness_u * (pt.u ? 1.0 : 0.0) + cfg.fitness_base;
    const WeightedSet selected = apply_selection(std::move(pool), [&](const AminoSequence& x) {
      return detect_motif(x, truth.confounded) ? std::exp(log_r) : 1.0;
    });
    for (std::size_t j = 0; j < selected.size(); ++j)
      if (detect_motif(selected.sequences()[j], truth.causal)) pt.causal_mass += selected.weights()[j];

    std::vector<AminoSequence> mature;
    mature.reserve(cfg.m_mature);
    for (std::size_t j = 0; j < cfg.m_mature; ++j) mature.push_back(selected.sequences()[selected.draw(prng)]);

    const double mean = cfg.gamma_a * (pt.causal_mass > cfg.eta / 2.0 ? 1.0 : 0.0) +
                        cfg.gamma_u * (pt.u ? 1.0 : 0.0) + cfg.gamma_0;
    const double y = prng.normal(mean, cfg.tau_y);

    if (!pt.zeta) {
      for (const auto* set : {&pre, &mature})
        for (const auto& s : *set) coincident += detect_motif(s, truth.causal) ? 1 : 0;
      unexposed += pre.size() + mature.size();
    }
    reps.emplace_back(pt.patient_id, WeightedSet(std::move(mature)), y, WeightedSet(std::move(pre)));
    truth.patients.push_back(std::move(pt));
  }
  truth.causal_coincidence_rate = unexposed ? static_cast<double>(coincident) / static_cast<double>(unexposed) : 0.0;

  seqcore::SplitConfig split;
  split.seed = cfg.seed;
  result.dataset.split_assignment = seqcore::assign_splits(reps, split);
  result.dataset.repertoires = std::move(reps);
  return result;
}

void write_ground_truth(const GroundTruth& truth, const std::filesystem::path& csv_path,
                        const std::filesystem::path& motif_json_path) {
  std::ofstream csv(csv_path, std::ios::binary);
  if (!csv) throw Error("cannot write " + csv_path.string());
  csv << "patient_id,zeta,u\n";
  for (const auto& p : truth.patients) csv << p.patient_id << ',' << int(p.zeta) << ',' << int(p.u) << '\n';

  nlohmann::ordered_json j;
  j["kappa_cau"] = truth.causal.motif.str();
  j["kappa_con"] = truth.confounded.motif.str();
  j["position"] = truth.causal.position;
  j["eta"] = truth.eta;
  j["seed"] = truth.seed;
  j["causal_coincidence_rate"] = truth.causal_coincidence_rate;
  std::ofstream js(motif_json_path, std::ios::binary);
  if (!js) throw Error("cannot write " + motif_json_path.string());
  js << j.dump(2) << '\n';
  if (!csv || !js) throw Error("ground-truth write failed");
}

GroundTruth read_ground_truth(const std::filesystem::path& csv_path, const std::filesystem::path& motif_json_path) {
  GroundTruth truth;
  {
    std::ifstream in(motif_json_path);
    if (!in) throw Error("cannot open " + motif_json_path.string());
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
      const std::size_t pos = j.at("position").get<std::size_t>();
      truth.causal = MotifSpec{AminoSequence(j.at("kappa_cau").get<std::string>()), pos};
      truth.confounded = MotifSpec{AminoSequence(j.at("kappa_con").get<std::string>()), pos};
      truth.eta = j.at("eta").get<double>();
      truth.seed = j.at("seed").get<std::uint64_t>();
      truth.causal_coincidence_rate = j.value("causal_coincidence_rate", 0.0);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(motif_json_path.string(), 0, e.what());
    } catch (const Error& e) {
      throw ParseError(motif_json_path.string(), 0, e.what());
    }
  }
  std::ifstream in(csv_path);
  if (!in) throw Error("cannot open " + csv_path.string());
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line) || (line != "patient_id,zeta,u" && line != "patient_id,zeta,u\r"))
    throw ParseError(csv_path.string(), 1, "expected header 'patient_id,zeta,u'");
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = seqcore::split_fields(line, ',');
    const auto flag = [&](std::string_view v) {
      if (v == "0") return false;
      if (v == "1") return true;
      throw ParseError(csv_path.string(), lineno, "expected 0 or 1, got '" + std::string(v) + "'");
    };
    if (f.size() != 3 || f[0].empty()) throw ParseError(csv_path.string(), lineno, "expected 3 fields");
    truth.patients.push_back(PatientTruth{std::string(f[0]), flag(f[1]), flag(f[2])});
  }
  return truth;
}

}  // namespace caire::simsynth
