#include <doctest.h>

#include <cmath>
#include <numbers>

#include "caire/errors.hpp"
#include "caire/models/caire_model.hpp"
#include "caire/ndiff/gradcheck.hpp"
#include "caire/ndiff/layers.hpp"
#include "support.hpp"

using namespace caire;
using namespace caire::models;
using seqcore::AminoSequence;
using seqcore::TokenizedSequence;

namespace {

constexpr std::size_t kLmax = 14;

// Losses here are O(10), so a central difference carries ~1e-11 absolute
// rounding noise at h = 1e-4. Coordinates whose gradient is below the 1e-4
// floor are therefore judged on absolute error (1e-10 at a 1e-6 bound).
const ndiff::GradCheckOptions kLayerCheck{1e-4, 1e-4, 1e-3};

std::vector<AminoSequence> random_sequences(seqcore::Rng& rng, std::size_t n, std::size_t lo = 2,
                                            std::size_t hi = kLmax - 1) {
  std::vector<AminoSequence> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(testing::random_sequence(rng, lo, hi));
  return out;
}

void randomize(ndiff::ParamStore& store, seqcore::Rng& rng, double scale) {
  for (auto& p : store.entries())
    for (double& v : p.value.values()) v = scale * rng.normal();
}

// Heads start at zero, which would hide every path below them from a
// gradient check; give them values.
void randomize_heads(ndiff::ParamStore& store, seqcore::Rng& rng) {
  for (const char* name : {"gamma_a", "gamma_r", "gamma_y", "W", "B"})
    if (store.contains(name))
      for (double& v : store.value(name).values()) v = 0.5 * rng.normal();
  store.value("log_tau_y")[0] = std::log(0.7);
  if (store.contains("log_tau_e")) store.value("log_tau_e")[0] = std::log(0.6);
}

struct ToyBatch {
  std::vector<std::vector<TokenizedSequence>> mature, pre;
  std::vector<PatientBatch> batch;
};

ToyBatch toy_batch(seqcore::Rng& rng, std::size_t patients, std::size_t per_side) {
  ToyBatch t;
  t.mature.resize(patients);
  t.pre.resize(patients);
  for (std::size_t i = 0; i < patients; ++i)
    for (std::size_t j = 0; j < per_side; ++j) {
      t.mature[i].push_back(seqcore::tokenize(testing::random_sequence(rng, 3, kLmax - 1)));
      t.pre[i].push_back(seqcore::tokenize(testing::random_sequence(rng, 3, kLmax - 1)));
    }
  for (std::size_t i = 0; i < patients; ++i) {
    PatientBatch pb;
    for (auto& s : t.mature[i]) pb.mature.push_back(&s);
    for (auto& s : t.pre[i]) pb.preselection.push_back(&s);
    pb.outcome = rng.normal();
    pb.sequence_scale = 1.5;
    t.batch.push_back(std::move(pb));
  }
  return t;
}

ModelConfig small_config(Variant v) {
  ModelConfig cfg = ModelConfig::for_variant(v, kLmax);
  if (v != Variant::kNonNeural) {
    cfg.d_a = 8;
    cfg.d_r = 3;
  }
  return cfg;
}

}  // namespace

TEST_SUITE("models") {
  TEST_CASE("gather convolution matches the dense reference") {
    seqcore::Rng rng(11);
    for (auto mode : {seqcore::EncodingMode::kOneHot, seqcore::EncodingMode::kBlosum50})
      for (auto pool : {Pooling::kMaxSelu, Pooling::kSum})
        for (std::size_t k : {3u, 5u, 9u}) {
          ConvStage stage("s", 6, k, mode, pool);
          ndiff::ParamStore store;
          stage.add_params(store);
          stage.init_params(store, rng);
          stage.prepare(store, kLmax);
          std::vector<double> fast(6);
          for (const auto& seq : random_sequences(rng, 40, 1, kLmax - 1)) {
            stage.forward(seqcore::tokenize(seq), fast.data());
            const auto dense = stage.forward_dense(seqcore::encode(seq, kLmax, mode), store);
            for (std::size_t o = 0; o < 6; ++o) CHECK(fast[o] == doctest::Approx(dense[o]).epsilon(1e-12));
          }
        }
  }

  TEST_CASE("zero-weight filters give SELU of the bias for any input") {
    ConvStage stage("theta.conv", 3, 5, seqcore::EncodingMode::kOneHot, Pooling::kMaxSelu);
    ndiff::ParamStore store;
    stage.add_params(store);
    store.value("theta.conv.b")[0] = -0.7;
    store.value("theta.conv.b")[1] = 0.0;
    store.value("theta.conv.b")[2] = 1.3;
    stage.prepare(store, kLmax);
    seqcore::Rng rng(2);
    std::vector<double> out(3);
    for (const auto& seq : random_sequences(rng, 10)) {
      stage.forward(seqcore::tokenize(seq), out.data());
      for (std::size_t o = 0; o < 3; ++o) CHECK(out[o] == ndiff::selu(store.value("theta.conv.b")[o]));
    }
  }

  TEST_CASE("h_a ignores padding rows beyond the end token") {
    seqcore::Rng rng(3);
    ConvStage stage("theta.conv", 4, 5, seqcore::EncodingMode::kOneHot, Pooling::kMaxSelu);
    ndiff::ParamStore store;
    stage.add_params(store);
    stage.init_params(store, rng);
    // Strongly positive bias makes SELU(conv(0)) of padding windows large, so
    // an unmasked max would pick them.
    for (double& b : store.value("theta.conv.b").values()) b = 5.0;
    for (const auto& seq : random_sequences(rng, 20, 5, 9)) {
      const auto a = stage.forward_dense(seqcore::encode(seq, 10, seqcore::EncodingMode::kOneHot), store);
      const auto b = stage.forward_dense(seqcore::encode(seq, 40, seqcore::EncodingMode::kOneHot), store);
      for (std::size_t o = 0; o < 4; ++o) CHECK(a[o] == b[o]);
    }
  }

  TEST_CASE("convolution stage gradients match finite differences") {
    seqcore::Rng rng(4);
    for (auto mode : {seqcore::EncodingMode::kOneHot, seqcore::EncodingMode::kBlosum50})
      for (auto pool : {Pooling::kMaxSelu, Pooling::kSum}) {
        ConvStage stage("s", 4, 3, mode, pool);
        ndiff::ParamStore store;
        stage.add_params(store);
        stage.init_params(store, rng);
        std::vector<TokenizedSequence> seqs;
        for (const auto& s : random_sequences(rng, 6, 1, kLmax - 1)) seqs.push_back(seqcore::tokenize(s));
        const std::vector<double> weights{0.3, -1.1, 0.8, 0.5};
        auto loss = [&](ndiff::ParamStore& st, bool want_grad) {
          stage.prepare(st, kLmax);
          double total = 0.0;
          std::vector<double> out(4);
          ConvTrace trace;
          for (const auto& s : seqs) {
            stage.forward(s, out.data(), &trace);
            for (std::size_t o = 0; o < 4; ++o) total += weights[o] * out[o];
            if (want_grad) stage.backward(s, trace, weights.data());
          }
          if (want_grad) stage.flush_grads();
          return total;
        };
        const auto report = ndiff::finite_diff_check(loss, store, kLayerCheck);
        INFO(report.worst_name, " ", report.worst_analytic, " vs ", report.worst_numeric);
        CHECK(report.max_rel_error < 1e-6);
        CHECK(report.checked > store.total_values() / 2);
      }
  }

  TEST_CASE("mlp gradients match finite differences") {
    seqcore::Rng rng(5);
    Mlp mlp("phi", {8, 16, 16, 3});
    ndiff::ParamStore store;
    mlp.add_params(store);
    mlp.init_params(store, rng);
    mlp.prepare(store);
    std::vector<double> x(8);
    for (double& v : x) v = rng.normal();
    const std::vector<double> w{0.4, -0.9, 1.7};
    std::vector<double> gx(8), gx_numeric(8);
    auto loss = [&](ndiff::ParamStore&, bool want_grad) {
      std::vector<double> y(3);
      MlpTrace trace;
      mlp.forward(x.data(), y.data(), &trace);
      if (want_grad) mlp.backward(trace, w.data(), gx.data());
      return w[0] * y[0] + w[1] * y[1] + w[2] * y[2];
    };
    const auto report = ndiff::finite_diff_check(loss, store, kLayerCheck);
    CHECK(report.max_rel_error < 1e-6);
    CHECK(report.ties.empty());

    loss(store, true);
    const auto input_loss = [&](std::span<const double> xs) {
      std::vector<double> y(3);
      mlp.forward(xs.data(), y.data());
      return w[0] * y[0] + w[1] * y[1] + w[2] * y[2];
    };
    const auto input_report = ndiff::finite_diff_check(input_loss, x, gx);
    CHECK(input_report.max_rel_error < 1e-6);
  }

  TEST_CASE("variant parameter sets") {
    ndiff::ParamStore unc;
    CaireModel(small_config(Variant::kUncorrected)).register_params(unc);
    for (const auto& p : unc.entries()) {
      CHECK(p.name.rfind("phi.", 0) != 0);
      CHECK(p.name.rfind("enc.", 0) != 0);
      CHECK(p.name != "W");
      CHECK(p.name != "B");
      CHECK(p.name != "log_tau_e");
      CHECK(p.name != "gamma_r");
    }
    ndiff::ParamStore caire;
    CaireModel(small_config(Variant::kCaire)).register_params(caire);
    CHECK(caire.contains("W"));
    CHECK(caire.contains("enc.ff1.w"));
    CHECK(caire.value("enc.ff1.w").dim(0) == 4);
    ndiff::ParamStore deeprc;
    CaireModel(small_config(Variant::kDeepRCStar)).register_params(deeprc);
    CHECK(deeprc.contains("attn.query"));
    CHECK_FALSE(deeprc.contains("gamma_r"));
    CaireModel nonneural(ModelConfig::for_variant(Variant::kNonNeural, kLmax));
    CHECK(nonneural.config().d_a == 4);
    CHECK(nonneural.config().kernel == 3);
    CHECK(nonneural.config().encoding == seqcore::EncodingMode::kBlosum50);
    CHECK(nonneural.main_param_names().size() + nonneural.propensity_param_names().size() == 19);
    CHECK(variant_from_string("deeprc*") == Variant::kDeepRCStar);
    CHECK(variant_from_string("NoPropensityCAIRE") == Variant::kNoPropensity);
    CHECK_THROWS_AS(variant_from_string("bogus"), ConfigError);
  }

  TEST_CASE("initial values: heads zero and tau at the prior median") {
    seqcore::Rng rng(6);
    CaireModel model(small_config(Variant::kCaire));
    auto store = model.init_params(rng);
    for (const char* name : {"gamma_a", "gamma_r", "gamma_y", "W", "B"})
      for (double v : store.value(name).values()) CHECK(v == 0.0);
    CHECK(store.value("log_tau_y")[0] == -1.0);
    CHECK(store.value("log_tau_e")[0] == -1.0);
    seqcore::Rng rng2(6);
    auto again = model.init_params(rng2);
    for (std::size_t i = 0; i < store.size(); ++i) CHECK(store.entries()[i].value == again.entries()[i].value);
  }

  TEST_CASE("manifest round trip") {
    ModelConfig cfg = small_config(Variant::kAttention);
    cfg.kernel = 7;
    const auto back = ModelConfig::from_json(nlohmann::json::parse(cfg.to_json().dump()));
    CHECK(back == cfg);
    auto j = cfg.to_json();
    j.erase("l_max");
    CHECK_THROWS_AS(ModelConfig::from_json(j), ConfigError);
  }

  TEST_CASE("encoder examples") {
    seqcore::Rng rng(7);
    CaireModel model(small_config(Variant::kCaire));
    auto store = model.init_params(rng);
    model.bind(store);
    const seqcore::WeightedSet a(random_sequences(rng, 7)), b(random_sequences(rng, 5));

    // Identical batches put the encoder at zero input: every such pair agrees.
    const auto aa = model.encode_patient(a, a), bb = model.encode_patient(b, b);
    CHECK(aa.rho == bb.rho);
    CHECK(aa.beta == bb.beta);

    // Swapping the batches negates the encoder input. Oracle: means from an
    // independent dense evaluation fed to a separately bound copy of the head.
    ConvStage conv("enc.conv", 8, 5, seqcore::EncodingMode::kOneHot, Pooling::kMaxSelu);
    Mlp head("enc", {8, 8, 4});
    head.prepare(store);
    std::vector<double> diff(8, 0.0);
    for (std::size_t j = 0; j < a.size(); ++j) {
      const auto e = conv.forward_dense(seqcore::encode(a.sequences()[j], kLmax, seqcore::EncodingMode::kOneHot), store);
      for (std::size_t o = 0; o < 8; ++o) diff[o] += a.weights()[j] * e[o];
    }
    for (std::size_t j = 0; j < b.size(); ++j) {
      const auto e = conv.forward_dense(seqcore::encode(b.sequences()[j], kLmax, seqcore::EncodingMode::kOneHot), store);
      for (std::size_t o = 0; o < 8; ++o) diff[o] -= b.weights()[j] * e[o];
    }
    for (auto sign : {1.0, -1.0}) {
      std::vector<double> in(8), out(4);
      for (std::size_t o = 0; o < 8; ++o) in[o] = sign * diff[o];
      head.forward(in.data(), out.data());
      const auto rep = sign > 0 ? model.encode_patient(a, b) : model.encode_patient(b, a);
      for (std::size_t k = 0; k < 3; ++k) CHECK(rep.rho[k] == doctest::Approx(out[k]).epsilon(1e-12));
      CHECK(rep.beta == doctest::Approx(out[3]).epsilon(1e-12));
    }

    // Uniform batches agree with the weighted-set form at uniform weights.
    std::vector<TokenizedSequence> ta(a.tokens()), tb(b.tokens());
    std::vector<const TokenizedSequence*> pa, pb;
    for (auto& t : ta) pa.push_back(&t);
    for (auto& t : tb) pb.push_back(&t);
    const auto r1 = model.encode_patient(pa, pb), r2 = model.encode_patient(a, b);
    for (std::size_t k = 0; k < 3; ++k) CHECK(r1.rho[k] == doctest::Approx(r2.rho[k]).epsilon(1e-12));
    CHECK_THROWS_AS(model.encode_patient(pa, {}), Error);
  }

  TEST_CASE("classifier and fitness examples") {
    seqcore::Rng rng(8);
    CaireModel model(small_config(Variant::kCaire));
    auto store = model.init_params(rng);
    model.bind(store);
    const auto x = AminoSequence("CASSLGQETQYF"), x0 = AminoSequence("CASRPGTEAF");
    FitnessRepresentation zero{{0.0, 0.0, 0.0}, 0.0};
    CHECK(model.classifier_loglik(seqcore::tokenize(x), 1, zero) == doctest::Approx(std::log(0.5)).epsilon(1e-15));
    CHECK(model.classifier_loglik(seqcore::tokenize(x), 0, zero) == doctest::Approx(std::log(0.5)).epsilon(1e-15));
    FitnessRepresentation far{{0.0, 0.0, 0.0}, 800.0};
    CHECK(model.classifier_loglik(seqcore::tokenize(x), 1, far) == doctest::Approx(0.0));

    FitnessRepresentation rep{{0.8, -1.2, 0.4}, 0.3};
    CHECK(model.fitness(x0, rep, x0) == 1.0);
    CHECK(model.fitness(x, zero, x0) == 1.0);
    FitnessRepresentation doubled{{1.6, -2.4, 0.8}, 0.3};
    const double f = model.fitness(x, rep, x0);
    CHECK(model.fitness(x, doubled, x0) == doctest::Approx(f * f).epsilon(1e-12));
  }

  TEST_CASE("repertoire embedding poolings") {
    seqcore::Rng rng(9);
    for (Variant v : {Variant::kCaire, Variant::kDeepRCStar}) {
      CaireModel model(small_config(v));
      auto store = model.init_params(rng);
      randomize(store, rng, 0.5);
      model.bind(store);
      const auto seqs = random_sequences(rng, 9);
      const auto single = model.repertoire_embedding(seqcore::WeightedSet({seqs[0]}));
      const auto ha = model.h_a(seqs[0]);
      for (std::size_t d = 0; d < ha.size(); ++d) CHECK(single[d] == doctest::Approx(ha[d]).epsilon(1e-14));

      const auto base = model.repertoire_embedding(seqcore::WeightedSet(seqs));
      auto reversed = seqs;
      std::reverse(reversed.begin(), reversed.end());
      const auto perm = model.repertoire_embedding(seqcore::WeightedSet(reversed));
      for (std::size_t k : {2u, 5u}) {
        std::vector<AminoSequence> dup;
        for (const auto& s : seqs)
          for (std::size_t r = 0; r < k; ++r) dup.push_back(s);
        const auto d = model.repertoire_embedding(seqcore::WeightedSet(dup));
        for (std::size_t i = 0; i < base.size(); ++i) CHECK(std::abs(d[i] - base[i]) < 1e-12);
      }
      for (std::size_t i = 0; i < base.size(); ++i) CHECK(std::abs(perm[i] - base[i]) < 1e-12);

      std::vector<TokenizedSequence> toks;
      for (const auto& s : seqs) toks.push_back(seqcore::tokenize(s));
      std::vector<const TokenizedSequence*> ptrs;
      for (auto& t : toks) ptrs.push_back(&t);
      const auto batch = model.repertoire_embedding(ptrs);
      for (std::size_t i = 0; i < base.size(); ++i) CHECK(std::abs(batch[i] - base[i]) < 1e-12);
    }
  }

  TEST_CASE("constant attention reduces to the plain mean") {
    seqcore::Rng rng(10);
    CaireModel model(small_config(Variant::kAttention));
    auto store = model.init_params(rng);
    randomize(store, rng, 0.5);
    for (double& q : store.value("attn.query").values()) q = 0.0;
    model.bind(store);
    const auto seqs = random_sequences(rng, 6);
    const auto att = model.repertoire_embedding(seqcore::WeightedSet(seqs));
    std::vector<double> mean(8, 0.0);
    for (const auto& s : seqs) {
      const auto h = model.h_a(s);
      for (std::size_t d = 0; d < 8; ++d) mean[d] += h[d] / 6.0;
    }
    for (std::size_t d = 0; d < 8; ++d) CHECK(att[d] == doctest::Approx(mean[d]).epsilon(1e-12));
    CHECK(model.attention_pool(seqcore::WeightedSet(seqs)).log_mean_g == doctest::Approx(0.0));
  }

  TEST_CASE("outcome and propensity reductions") {
    seqcore::Rng rng(12);
    CaireModel caire(small_config(Variant::kCaire));
    auto store = caire.init_params(rng);
    randomize_heads(store, rng);
    caire.bind(store);
    const std::vector<double> emb{0.1, -0.4, 0.3, 0.9, 0.0, 1.2, -0.7, 0.2};
    FitnessRepresentation rep{{0.5, -1.0, 0.25}, 0.1};

    // gamma_a = gamma_r = 0: the mean is gamma_y.
    ndiff::ParamStore zeroed = store;
    for (double& v : zeroed.value("gamma_a").values()) v = 0.0;
    for (double& v : zeroed.value("gamma_r").values()) v = 0.0;
    CaireModel z(small_config(Variant::kCaire));
    z.bind(zeroed);
    CHECK(z.outcome_mean(emb, &rep) == zeroed.value("gamma_y")[0]);

    // W = B = 0: CAIRE equals the no-propensity mean.
    ndiff::ParamStore nowb = store;
    for (double& v : nowb.value("W").values()) v = 0.0;
    for (double& v : nowb.value("B").values()) v = 0.0;
    CaireModel c2(small_config(Variant::kCaire));
    c2.bind(nowb);
    double expected = store.value("gamma_y")[0];
    for (std::size_t d = 0; d < 8; ++d) expected += store.value("gamma_a")[d] * emb[d];
    for (std::size_t k = 0; k < 3; ++k) expected += store.value("gamma_r")[k] * rep.rho[k];
    CHECK(c2.outcome_mean(emb, &rep) == doctest::Approx(expected).epsilon(1e-14));

    // Embedding exactly at W rho + B.
    std::vector<double> at(8);
    for (std::size_t d = 0; d < 8; ++d) {
      at[d] = store.value("B")[d];
      for (std::size_t k = 0; k < 3; ++k) at[d] += store.value("W")(d, k) * rep.rho[k];
    }
    const double te = caire.tau_e();
    CHECK(caire.propensity_loglik(at, rep.rho) ==
          doctest::Approx(-8.0 * std::log(te * std::sqrt(2.0 * std::numbers::pi))).epsilon(1e-13));
    // rho = 0: the mean is B.
    std::vector<double> zero_rho(3, 0.0);
    std::vector<double> b(store.value("B").values().begin(), store.value("B").values().end());
    CHECK(caire.propensity_loglik(b, zero_rho) == doctest::Approx(caire.propensity_loglik(at, rep.rho)));

    store.value("log_tau_y")[0] = -std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(caire.outcome_loglik(0.0, emb, &rep), NumericError);
  }

  TEST_CASE("non-neural convolution is affine in the encoding") {
    seqcore::Rng rng(13);
    ConvStage stage("theta.conv", 4, 3, seqcore::EncodingMode::kBlosum50, Pooling::kSum);
    ndiff::ParamStore store;
    stage.add_params(store);
    stage.init_params(store, rng);
    const auto enc_a = seqcore::encode(AminoSequence("CASSLGQ"), kLmax, seqcore::EncodingMode::kBlosum50);
    const auto enc_b = seqcore::encode(AminoSequence("CAWRDTY"), kLmax, seqcore::EncodingMode::kBlosum50);
    auto zero = enc_a;
    std::fill(zero.matrix.begin(), zero.matrix.end(), 0.0);
    auto sum = enc_a;
    for (std::size_t i = 0; i < sum.matrix.size(); ++i) sum.matrix[i] += enc_b.matrix[i];
    const auto fa = stage.forward_dense(enc_a, store), fb = stage.forward_dense(enc_b, store);
    const auto fs = stage.forward_dense(sum, store), f0 = stage.forward_dense(zero, store);
    const double nv = static_cast<double>(valid_positions(8, 3));
    for (std::size_t o = 0; o < 4; ++o) {
      CHECK(fs[o] == doctest::Approx(fa[o] + fb[o] - f0[o]).epsilon(1e-12));
      CHECK(f0[o] == doctest::Approx(nv * store.value("theta.conv.b")[o]).epsilon(1e-14));
    }
  }

  TEST_CASE("composed loss gradients match finite differences on a 4-patient batch") {
    for (Variant v : {Variant::kCaire, Variant::kNoPropensity, Variant::kUncorrected, Variant::kAttention,
                      Variant::kDeepRCStar, Variant::kNonNeural}) {
      CAPTURE(to_string(v));
      seqcore::Rng rng(100 + static_cast<std::uint64_t>(v));
      CaireModel model(small_config(v));
      auto store = model.init_params(rng);
      randomize_heads(store, rng);
      auto toy = toy_batch(rng, 4, 3);
      const ObjectiveOptions opts{2.0, 0.4};
      auto loss = [&](ndiff::ParamStore& st, bool want_grad) {
        model.bind(st);
        return model.objective(toy.batch, opts, want_grad).loss;
      };
      ndiff::GradCheckOptions gopts;
      gopts.h = 1e-5;
      gopts.abs_floor = 1e-4;
      gopts.scale_tol = 1e-6;
      const auto report = ndiff::finite_diff_check(loss, store, gopts);
      INFO(report.worst_name, "[", report.worst_index, "] analytic ", report.worst_analytic, " numeric ",
           report.worst_numeric, " ties ", report.ties.size(), " checked ", report.checked);
      CHECK(report.max_rel_error < 1e-4);
      CHECK(report.checked > store.total_values() / 2);
    }
  }

  TEST_CASE("propensity loss gradients and isolation") {
    seqcore::Rng rng(21);
    CaireModel model(small_config(Variant::kCaire));
    auto store = model.init_params(rng);
    randomize_heads(store, rng);
    model.bind(store);
    auto toy = toy_batch(rng, 4, 3);
    const auto res = model.objective(toy.batch, {}, false);
    auto loss = [&](ndiff::ParamStore& st, bool want_grad) {
      model.bind(st);
      return model.propensity_objective(res.embeddings, res.representations, 3.0, want_grad);
    };
    const auto report = ndiff::finite_diff_check(loss, store, {1e-5, 1e-4, 1e-3});
    CHECK(report.max_rel_error < 1e-6);

    store.zero_grad();
    model.bind(store);
    model.propensity_objective(res.embeddings, res.representations, 3.0, true);
    for (const auto& p : store.entries()) {
      const bool prop = p.name == "W" || p.name == "B" || p.name == "log_tau_e";
      if (prop) continue;
      for (double g : p.grad.values()) CHECK(g == 0.0);
    }
  }

  TEST_CASE("objective reports classifier accuracy and is deterministic") {
    seqcore::Rng rng(22);
    CaireModel model(small_config(Variant::kCaire));
    auto store = model.init_params(rng);
    model.bind(store);
    auto toy = toy_batch(rng, 3, 4);
    const auto a = model.objective(toy.batch, {}, true);
    const auto grads = store.entries();
    store.zero_grad();
    const auto b = model.objective(toy.batch, {}, true);
    CHECK(a.loss == b.loss);
    CHECK(a.classifier_total == 24);
    for (std::size_t i = 0; i < grads.size(); ++i) CHECK(grads[i].grad == store.entries()[i].grad);
    CHECK(std::isfinite(a.loss));
  }

  TEST_CASE("sequences longer than L_max are rejected") {
    seqcore::Rng rng(23);
    CaireModel model(small_config(Variant::kCaire));
    auto store = model.init_params(rng);
    model.bind(store);
    CHECK_THROWS_AS(model.h_a(AminoSequence(std::string(kLmax, 'A'))), LengthError);
    TokenizedSequence long_tok = seqcore::tokenize(AminoSequence(std::string(kLmax + 3, 'A')));
    std::vector<double> out(8);
    CHECK_THROWS_AS(model.h_a(long_tok, out.data()), ShapeError);
  }
}
