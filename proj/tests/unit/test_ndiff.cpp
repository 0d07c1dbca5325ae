#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "caire/errors.hpp"
#include "caire/ndiff/amsgrad.hpp"
#include "caire/ndiff/array.hpp"
#include "caire/ndiff/checkpoint.hpp"
#include "caire/ndiff/gradcheck.hpp"
#include "caire/ndiff/layers.hpp"
#include "caire/ndiff/params.hpp"
#include "caire/seqcore/rng.hpp"
#include "support.hpp"

using namespace caire;
using namespace caire::ndiff;

namespace {

Array random_array(std::vector<std::size_t> shape, seqcore::Rng& rng, double scale = 1.0) {
  Array a(std::move(shape));
  for (auto& v : a.values()) v = scale * rng.normal();
  return a;
}

double dot(const Array& a, const Array& b) {
  return std::inner_product(a.values().begin(), a.values().end(), b.values().begin(), 0.0);
}

// Wraps a scalar function of a flat vector that reinterprets it as one array.
GradCheckReport check_array(const Array& at, const Array& analytic, const std::function<double(const Array&)>& f,
                            GradCheckOptions opts = {}) {
  const auto flat = [&](std::span<const double> x) {
    Array a(at.shape(), std::vector<double>(x.begin(), x.end()));
    return f(a);
  };
  return finite_diff_check(flat, at.values(), analytic.values(), opts);
}

}  // namespace

TEST_SUITE("ndiff") {
  TEST_CASE("conv1d identity kernel and zero input") {
    Array input({5, 1}, {0.3, -1.2, 2.0, 0.0, 7.5});
    Array w({1, 1, 1}, {1.0});
    Array b({1}, {0.0});
    CHECK(conv1d(input, w, b) == input);

    seqcore::Rng rng(3);
    Array filters = random_array({3, 3, 4}, rng);
    Array bias({3}, {0.5, -2.0, 1.25});
    const Array out = conv1d(Array({6, 4}), filters, bias);
    REQUIRE(out.shape() == std::vector<std::size_t>{4, 3});
    for (std::size_t t = 0; t < 4; ++t)
      for (std::size_t o = 0; o < 3; ++o) CHECK(out(t, o) == bias[o]);

    CHECK_THROWS_AS(conv1d(Array({2, 4}), filters, bias), ShapeError);
  }

  TEST_CASE("conv1d backward matches finite differences") {
    seqcore::Rng rng(11);
    const Array input = random_array({6, 4}, rng);
    const Array filters = random_array({2, 3, 4}, rng);
    const Array bias = random_array({2}, rng);
    const Array probe = random_array({4, 2}, rng);  // loss = <probe, conv(...)>

    Array gi({6, 4}), gf({2, 3, 4}), gb({2});
    conv1d_backward(input, filters, probe, gi, gf, gb);

    const auto r_in = check_array(input, gi, [&](const Array& x) { return dot(probe, conv1d(x, filters, bias)); });
    const auto r_f = check_array(filters, gf, [&](const Array& f) { return dot(probe, conv1d(input, f, bias)); });
    const auto r_b = check_array(bias, gb, [&](const Array& b) { return dot(probe, conv1d(input, filters, b)); });
    CHECK(r_in.max_rel_error < 1e-6);
    CHECK(r_f.max_rel_error < 1e-6);
    CHECK(r_b.max_rel_error < 1e-6);
    CHECK(r_in.ties.empty());
  }

  TEST_CASE("selu values and gradient") {
    CHECK(selu(0.0) == 0.0);
    CHECK(selu(1.0) == doctest::Approx(1.0507009873554805).epsilon(1e-15));
    CHECK(selu(-50.0) == doctest::Approx(-kSeluScale * kSeluAlpha).epsilon(1e-15));
    CHECK(-kSeluScale * kSeluAlpha == doctest::Approx(-1.7581).epsilon(1e-4));

    seqcore::Rng rng(5);
    const Array x = random_array({3, 4}, rng, 2.0);
    const Array probe = random_array({3, 4}, rng);
    const Array g = selu_backward(x, probe);
    const auto r = check_array(x, g, [&](const Array& a) { return dot(probe, selu(a)); });
    CHECK(r.max_rel_error < 1e-6);
  }

  TEST_CASE("maxpool over positions") {
    Array one({1, 3}, {1.0, -2.0, 3.0});
    CHECK(maxpool_positions(one).values == Array({3}, {1.0, -2.0, 3.0}));

    seqcore::Rng rng(8);
    const Array x = random_array({7, 3}, rng);
    Array permuted({7, 3});
    const std::size_t order[7] = {4, 0, 6, 2, 1, 5, 3};
    for (std::size_t t = 0; t < 7; ++t)
      for (std::size_t c = 0; c < 3; ++c) permuted(t, c) = x(order[t], c);
    CHECK(maxpool_positions(x).values == maxpool_positions(permuted).values);

    const Array probe = random_array({3}, rng);
    const auto pooled = maxpool_positions(x);
    const Array g = maxpool_backward(pooled, probe, 7);
    const auto r = check_array(x, g, [&](const Array& a) { return dot(probe, maxpool_positions(a).values); });
    CHECK(r.max_rel_error < 1e-6);
    CHECK(r.ties.empty());

    // Only the first rows count when valid_rows is given.
    Array masked({3, 1}, {1.0, 2.0, 50.0});
    CHECK(maxpool_positions(masked, 2).values[0] == 2.0);
  }

  TEST_CASE("maxpool ties go to the lowest index and are flagged by the checker") {
    Array x({3, 1}, {2.0, 2.0, -1.0});
    const auto pooled = maxpool_positions(x);
    CHECK(pooled.argmax[0] == 0);
    const Array g = maxpool_backward(pooled, Array({1}, {1.0}), 3);
    const auto r = check_array(x, g, [](const Array& a) { return maxpool_positions(a).values[0]; });
    CHECK(r.ties.size() == 2);
    CHECK(r.checked == 1);
    CHECK(r.max_rel_error < 1e-9);
  }

  TEST_CASE("linear backward") {
    seqcore::Rng rng(21);
    const Array x = random_array({5}, rng);
    const Array w = random_array({3, 5}, rng);
    const Array b = random_array({3}, rng);
    const Array probe = random_array({3}, rng);
    Array gx({5}), gw({3, 5}), gb({3});
    linear_backward(x, w, probe, gx, gw, gb);
    CHECK(check_array(x, gx, [&](const Array& a) { return dot(probe, linear(a, w, b)); }).max_rel_error < 1e-6);
    CHECK(check_array(w, gw, [&](const Array& a) { return dot(probe, linear(x, a, b)); }).max_rel_error < 1e-6);
    CHECK(check_array(b, gb, [&](const Array& a) { return dot(probe, linear(x, w, a)); }).max_rel_error < 1e-6);
  }

  TEST_CASE("likelihood and prior values") {
    CHECK(sigmoid(0.0) == 0.5);
    CHECK(bernoulli_loglik(1.0, 0.5) == doctest::Approx(std::log(0.5)).epsilon(1e-15));
    CHECK(bernoulli_loglik_logit(0.0, 0.0) == doctest::Approx(std::log(0.5)).epsilon(1e-15));
    CHECK(bernoulli_loglik_logit(1.0, 800.0) == doctest::Approx(0.0));
    CHECK(std::isfinite(bernoulli_loglik_logit(0.0, 800.0)));
    const double tau = 0.37;
    CHECK(gaussian_loglik(1.5, 1.5, tau) == doctest::Approx(-std::log(tau * std::sqrt(2.0 * M_PI))).epsilon(1e-14));
    CHECK_THROWS_AS(gaussian_loglik(0.0, 0.0, 0.0), NumericError);
    CHECK_THROWS_AS(gaussian_loglik(0.0, 0.0, -1.0), NumericError);
    CHECK_THROWS_AS(lognormal_logprior(0.0, -1.0, 2.0), NumericError);
    // LogNormal(mu, s) density at its median e^mu: 1 / (e^mu s sqrt(2 pi)).
    CHECK(lognormal_logprior(std::exp(-1.0), -1.0, 2.0) ==
          doctest::Approx(-std::log(std::exp(-1.0) * 2.0 * std::sqrt(2.0 * M_PI))).epsilon(1e-14));
  }

  TEST_CASE("likelihood gradients") {
    const double pts[][3] = {{0.3, -0.4, 0.7}, {-2.0, 1.0, 1.9}, {5.0, 4.5, 0.1}};
    for (const auto& p : pts) {
      const auto g = gaussian_loglik_grad(p[0], p[1], p[2]);
      const std::vector<double> x = {p[0], p[1], p[2]};
      const std::vector<double> a = {g.d_value, g.d_mean, g.d_scale};
      const auto r = finite_diff_check([](std::span<const double> v) { return gaussian_loglik(v[0], v[1], v[2]); }, x,
                                       a);
      CHECK(r.max_rel_error < 1e-6);

      double dn = 0.0, dl = 0.0;
      normal_logprior(p[0], p[1], p[2], &dn);
      lognormal_logprior(p[2], p[1], 2.0, &dl);
      const std::vector<double> xn = {p[0]}, an = {dn}, xl = {p[2]}, al = {dl};
      CHECK(finite_diff_check([&](std::span<const double> v) { return normal_logprior(v[0], p[1], p[2]); }, xn, an)
                .max_rel_error < 1e-6);
      CHECK(finite_diff_check([&](std::span<const double> v) { return lognormal_logprior(v[0], p[1], 2.0); }, xl, al)
                .max_rel_error < 1e-6);
    }
    for (double s : {0.0, 1.0})
      for (double logit : {-3.0, -0.2, 0.0, 1.7}) {
        const std::vector<double> x = {logit}, a = {s - sigmoid(logit)};
        CHECK(finite_diff_check([&](std::span<const double> v) { return bernoulli_loglik_logit(s, v[0]); }, x, a)
                  .max_rel_error < 1e-6);
      }
  }

  TEST_CASE("param store priors including log-scale parameters") {
    ParamStore store;
    store.add("gamma", {3}, {PriorFamily::kNormal, 0.0, 100.0});
    store.add("log_tau", {1}, {PriorFamily::kLogNormal, -1.0, 2.0}, true);
    store.add("free", {2});
    CHECK_THROWS_AS(store.add("gamma", {1}), Error);
    CHECK(store.entries()[1].name == "log_tau");
    store.value("gamma") = Array({3}, {1.0, -20.0, 3.0});
    store.value("log_tau")[0] = 0.3;

    const auto loss = [](ParamStore& s, bool want) { return -s.log_prior({}, want); };
    // The wide gamma prior gives gradients near 1e-4, so a larger step keeps
    // rounding error well below them; the prior is exactly quadratic in gamma.
    GradCheckOptions opts;
    opts.h = 1e-4;
    const auto r = finite_diff_check(loss, store, opts);
    CHECK(r.max_rel_error < 1e-6);
    CHECK(store.grad("free")[0] == 0.0);
    // Only named parameters contribute.
    CHECK(store.log_prior({"free"}) == 0.0);
  }

  TEST_CASE("finite difference harness on a quadratic") {
    seqcore::Rng rng(2);
    const std::size_t n = 6;
    Array a({n, n});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j <= i; ++j) a(i, j) = a(j, i) = rng.normal();
    const Array b = random_array({n}, rng);
    const Array x = random_array({n}, rng);
    const auto f = [&](std::span<const double> v) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        s += b[i] * v[i];
        for (std::size_t j = 0; j < n; ++j) s += 0.5 * v[i] * a(i, j) * v[j];
      }
      return s;
    };
    std::vector<double> grad(n);
    for (std::size_t i = 0; i < n; ++i) {
      grad[i] = b[i];
      for (std::size_t j = 0; j < n; ++j) grad[i] += a(i, j) * x[j];
    }
    GradCheckOptions opts;
    opts.h = 1e-4;
    const auto r = finite_diff_check(f, x.values(), grad, opts);
    CHECK(r.max_rel_error < 1e-9);
    CHECK(r.checked == n);

    grad[3] += 0.01;
    const auto bad = finite_diff_check(f, x.values(), grad, opts);
    CHECK(bad.worst_index == 3);
    CHECK(bad.max_rel_error > 1e-4);
  }

  TEST_CASE("scale test skips a small kink just inside h") {
    // Slope 1 left of 3e-6, 1 + 5e-4 right of it. At h = 1e-5 the one-sided
    // slopes differ by 3.5e-4, under kink_tol, but the central difference is
    // biased by 1.75e-4 while the h / 10 difference is exact.
    const auto f = [](std::span<const double> v) { return v[0] + 5e-4 * std::max(0.0, v[0] - 3e-6) + std::sin(v[1]); };
    const std::vector<double> x{0.0, 0.4}, grad{1.0, std::cos(0.4)};
    GradCheckOptions opts;
    opts.h = 1e-5;
    const auto plain = finite_diff_check(f, x, grad, opts);
    CHECK(plain.ties.empty());
    CHECK(plain.max_rel_error > 1e-4);

    opts.scale_tol = 1e-6;
    const auto scaled = finite_diff_check(f, x, grad, opts);
    REQUIRE(scaled.ties.size() == 1);
    CHECK(scaled.ties[0] == 0);
    CHECK(scaled.checked == 1);
    CHECK(scaled.max_rel_error < 1e-9);

    // A wrong gradient on the smooth coordinate is still reported.
    const std::vector<double> wrong{1.0, std::cos(0.4) + 1e-3};
    const auto bad = finite_diff_check(f, x, wrong, opts);
    CHECK(bad.worst_index == 1);
    CHECK(bad.max_rel_error > 1e-4);
  }

  TEST_CASE("amsgrad update rules") {
    ParamStore store;
    store.add("w", {4});
    store.value("w") = Array({4}, {1.0, -2.0, 0.5, 3.0});

    SUBCASE("zero gradient without weight decay leaves parameters unchanged") {
      AmsGradConfig cfg;
      cfg.weight_decay = 0.0;
      auto st = make_amsgrad_state(store, {"w"}, cfg);
      const Array before = store.value("w");
      for (int i = 0; i < 5; ++i) amsgrad_step(store, st);
      CHECK(store.value("w") == before);
    }
    SUBCASE("first step with unit gradient") {
      AmsGradConfig cfg;
      cfg.weight_decay = 0.0;
      auto st = make_amsgrad_state(store, {"w"}, cfg);
      store.grad("w").fill(1.0);
      amsgrad_step(store, st);
      // m_hat = 1 and v_hat / (1 - beta2) = 1 after one step.
      const double expected = cfg.lr / (1.0 + cfg.eps);
      CHECK(1.0 - store.value("w")[0] == doctest::Approx(expected).epsilon(1e-12));
      CHECK(std::abs(1.0 - store.value("w")[0] - 0.01) < 1e-9);
    }
    SUBCASE("decoupled weight decay") {
      auto st = make_amsgrad_state(store, {"w"});
      amsgrad_step(store, st);
      CHECK(store.value("w")[3] == doctest::Approx(3.0 * (1.0 - 0.01 * 0.01)).epsilon(1e-15));
    }
    SUBCASE("running max is nondecreasing") {
      auto st = make_amsgrad_state(store, {"w"});
      seqcore::Rng rng(13);
      Array prev = st.v_hat[0];
      for (int step = 0; step < 100; ++step) {
        for (auto& g : store.grad("w").values()) g = rng.normal() * (step % 10 == 0 ? 5.0 : 0.1);
        amsgrad_step(store, st);
        for (std::size_t i = 0; i < 4; ++i) CHECK(st.v_hat[0][i] >= prev[i]);
        prev = st.v_hat[0];
      }
      CHECK(st.t == 100);
    }
    SUBCASE("non-finite gradient names the parameter") {
      auto st = make_amsgrad_state(store, {"w"});
      store.grad("w")[2] = std::numeric_limits<double>::quiet_NaN();
      const Array before = store.value("w");
      try {
        amsgrad_step(store, st);
        FAIL("expected NumericError");
      } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("'w'") != std::string::npos);
      }
      CHECK(store.value("w") == before);
      CHECK(st.t == 0);
    }
  }

  TEST_CASE("amsgrad is bitwise deterministic") {
    const auto run = [] {
      ParamStore store;
      store.add("a", {3, 2});
      store.add("b", {2});
      seqcore::Rng rng(99);
      for (auto& p : store.entries())
        for (auto& v : p.value.values()) v = rng.normal();
      auto st = make_amsgrad_state(store, {"a", "b"});
      for (int i = 0; i < 50; ++i) {
        for (auto& p : store.entries())
          for (std::size_t k = 0; k < p.value.size(); ++k) p.grad[k] = p.value[k] * p.value[k] - rng.uniform();
        amsgrad_step(store, st);
      }
      return serialize_arrays(param_values(store));
    };
    CHECK(run() == run());
  }

  TEST_CASE("checkpoint round trip is byte exact") {
    seqcore::Rng rng(17);
    NamedArrays arrays;
    arrays.emplace_back("theta.conv.w", random_array({2, 3, 4}, rng));
    arrays.emplace_back("scalar", Array({1}, {-0.0}));
    arrays.emplace_back("tiny", Array({2}, {std::numeric_limits<double>::denorm_min(), 1e308}));
    const std::string bytes = serialize_arrays(arrays);
    CHECK(bytes.substr(0, 8) == "CAIRECKP");
    const auto back = deserialize_arrays(bytes);
    REQUIRE(back.size() == 3);
    CHECK(back[0].first == "theta.conv.w");
    CHECK(back[0].second == arrays[0].second);
    CHECK(std::signbit(back[1].second[0]));
    CHECK(serialize_arrays(back) == bytes);

    testing::TempDir dir("ndiff");
    save_arrays(dir.path() / "m.ckpt", arrays);
    CHECK(testing::read_file(dir.path() / "m.ckpt") == bytes);
    CHECK(serialize_arrays(load_arrays(dir.path() / "m.ckpt")) == bytes);

    CHECK_THROWS_AS(deserialize_arrays("NOTACKPT" + bytes.substr(8)), Error);
    CHECK_THROWS_AS(deserialize_arrays(bytes.substr(0, bytes.size() - 3)), Error);
    std::string wrong_version = bytes;
    wrong_version[8] = 9;
    CHECK_THROWS_AS(deserialize_arrays(wrong_version), Error);
  }

  TEST_CASE("restore_params checks names and shapes") {
    ParamStore store;
    store.add("a", {2});
    store.add("b", {1});
    NamedArrays arrays = {{"b", Array({1}, {4.0})}, {"a", Array({2}, {1.0, 2.0})}};
    restore_params(store, arrays);
    CHECK(store.value("a")[1] == 2.0);
    CHECK(store.value("b")[0] == 4.0);
    CHECK_THROWS_AS(restore_params(store, NamedArrays{{"a", Array({2})}}), Error);
    CHECK_THROWS_AS(restore_params(store, NamedArrays{{"a", Array({3})}, {"b", Array({1})}}), ShapeError);
  }

  TEST_CASE("array finiteness check") {
    Array a({2}, {1.0, std::numeric_limits<double>::infinity()});
    CHECK_THROWS_AS(a.check_finite("probe"), NumericError);
    CHECK_THROWS_AS(Array({2, 2}, std::vector<double>{1.0}), ShapeError);
  }
}
