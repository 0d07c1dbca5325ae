#include <benchmark/benchmark.h>

#include "caire/effects/effects.hpp"
#include "caire/evalkit/evalkit.hpp"
#include "caire/simsynth/simulate.hpp"
#include "caire/train/trainer.hpp"

using namespace caire;

namespace {

const simsynth::SimResult& cohort() {
  static const simsynth::SimResult sim = [] {
    simsynth::SimConfig cfg;
    cfg.n_patients = 40;
    cfg.m_mature = 200;
    cfg.b_preselect = 200;
    cfg.eta = 0.05;
    cfg.seed = 1;
    return simsynth::simulate_cohort(cfg, simsynth::SyntheticSampler(), seqcore::Rng(cfg.seed));
  }();
  return sim;
}

models::Variant variant_arg(std::int64_t v) {
  return v == 0 ? models::Variant::kCaire : models::Variant::kUncorrected;
}

void BM_ConvForward(benchmark::State& state) {
  const auto& data = cohort().dataset;
  models::CaireModel model(models::ModelConfig::for_variant(models::Variant::kCaire, data.l_max()));
  seqcore::Rng rng(2);
  auto params = model.init_params(rng);
  model.bind(params);
  const auto tok = seqcore::tokenize(seqcore::AminoSequence("CASSLGQETQYF"));
  std::vector<double> out(model.config().d_a);
  for (auto _ : state) {
    model.h_a(tok, out.data());
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_ConvForward);

// One optimizer step (forward, backward, update) at the default minibatch size.
void BM_TrainStep(benchmark::State& state) {
  const auto& data = cohort().dataset;
  train::TrainConfig cfg;
  cfg.total_steps = 1u << 30;
  cfg.eval_period = 1u << 30;
  train::Trainer trainer(data, train::split_from_dataset(data),
                         models::ModelConfig::for_variant(variant_arg(state.range(0)), data.l_max()), cfg);
  auto st = trainer.initial_state();
  for (auto _ : state) trainer.run(st, st.step + 1);
  state.SetLabel(std::string(models::to_string(variant_arg(state.range(0)))));
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_AteScoring(benchmark::State& state) {
  const auto& data = cohort().dataset;
  train::TrainConfig cfg;
  cfg.total_steps = 2;
  cfg.eval_period = 2;
  const auto fit = train::train(data, train::split_from_dataset(data),
                                models::ModelConfig::for_variant(models::Variant::kCaire, data.l_max()), cfg);
  effects::EffectModel em(fit);
  const seqcore::AminoSequence a("CASSLGQETQYF");
  for (auto _ : state) benchmark::DoNotOptimize(em.ate(a, 0.1));
}
BENCHMARK(BM_AteScoring);

void BM_PrAuc(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  seqcore::Rng rng(3);
  std::vector<double> scores(n);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = rng.uniform() < 0.1 ? 1 : 0;
    scores[i] = rng.normal() + labels[i];
  }
  for (auto _ : state) benchmark::DoNotOptimize(evalkit::pr_auc(scores, labels));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_PrAuc)->Range(1 << 10, 1 << 17)->Complexity(benchmark::oNLogN);

}  // namespace

BENCHMARK_MAIN();
