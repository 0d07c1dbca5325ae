#include "caire/ndiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "caire/errors.hpp"

namespace caire::ndiff {

namespace {

struct Probe {
  double numeric;
  bool kink;
};

template <typename Eval>
Probe probe(Eval&& eval_at, double x, double f0, const GradCheckOptions& opts) {
  const double h = opts.h;
  const double fp = eval_at(x + h);
  const double fm = eval_at(x - h);
  const double right = (fp - f0) / h;
  const double left = (f0 - fm) / h;
  bool kink = std::abs(right - left) > opts.kink_tol * std::max({1.0, std::abs(right), std::abs(left)});
  const double central = (fp - fm) / (2.0 * h);
  if (!kink && opts.scale_tol > 0.0) {
    // A kink within h biases the wide difference but not the narrow one.
    const double fine = (eval_at(x + h / 10.0) - eval_at(x - h / 10.0)) / (h / 5.0);
    kink = std::abs(central - fine) > opts.scale_tol * std::max(1.0, std::abs(central));
  }
  return {central, kink};
}

void record(GradCheckReport& rep, std::size_t flat, const std::string& name, double a, double n, const Probe& p,
            const GradCheckOptions& opts) {
  if (p.kink) {
    rep.ties.push_back(flat);
    return;
  }
  ++rep.checked;
  const double err = std::abs(a - n) / std::max({std::abs(a), std::abs(n), opts.abs_floor});
  if (err > rep.max_rel_error || rep.checked == 1) {
    rep.max_rel_error = err;
    rep.worst_index = flat;
    rep.worst_name = name;
    rep.worst_analytic = a;
    rep.worst_numeric = n;
  }
}

}  // namespace

GradCheckReport finite_diff_check(const std::function<double(std::span<const double>)>& f, std::span<const double> x,
                                  std::span<const double> analytic, const GradCheckOptions& opts) {
  if (x.size() != analytic.size()) throw ShapeError("finite_diff_check: gradient size does not match point");
  GradCheckReport rep;
  std::vector<double> work(x.begin(), x.end());
  const double f0 = f(work);
  for (std::size_t i = 0; i < work.size(); ++i) {
    const double orig = work[i];
    const auto eval_at = [&](double v) {
      work[i] = v;
      const double out = f(work);
      work[i] = orig;
      return out;
    };
    const Probe p = probe(eval_at, orig, f0, opts);
    record(rep, i, "x[" + std::to_string(i) + "]", analytic[i], p.numeric, p, opts);
  }
  return rep;
}

GradCheckReport finite_diff_check(const std::function<double(ParamStore&, bool)>& loss, ParamStore& store,
                                  const GradCheckOptions& opts) {
  store.zero_grad();
  const double f0 = loss(store, true);
  std::vector<Array> analytic;
  for (const auto& p : store.entries()) analytic.push_back(p.grad);

  GradCheckReport rep;
  std::size_t flat = 0;
  for (std::size_t k = 0; k < store.entries().size(); ++k) {
    for (std::size_t i = 0; i < analytic[k].size(); ++i, ++flat) {
      auto& value = store.entries()[k].value;
      const double orig = value[i];
      const auto eval_at = [&](double v) {
        value[i] = v;
        const double out = loss(store, false);
        value[i] = orig;
        return out;
      };
      const Probe p = probe(eval_at, orig, f0, opts);
      record(rep, flat, store.entries()[k].name + "[" + std::to_string(i) + "]", analytic[k][i], p.numeric, p, opts);
    }
  }
  for (std::size_t k = 0; k < store.entries().size(); ++k) store.entries()[k].grad = analytic[k];
  return rep;
}

}  // namespace caire::ndiff
