#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "caire/ndiff/params.hpp"

namespace caire::ndiff {

struct GradCheckOptions {
  double h = 1e-6;
  /// Denominator floor for the relative error, so coordinates whose true
  /// gradient is ~0 are judged on absolute error.
  double abs_floor = 1e-6;
  /// A coordinate whose one-sided slopes differ by more than
  /// kink_tol * max(1, |slope|) sits on a kink (e.g. a maxpool tie) and is skipped.
  double kink_tol = 1e-3;
  /// When positive, also skip coordinates whose central differences at h and
  /// h / 10 disagree by more than scale_tol * max(1, |slope|). This catches a
  /// kink a little under h away whose slope jump is too small for kink_tol.
  /// Smooth coordinates agree to truncation plus rounding error.
  double scale_tol = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::string worst_name;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  std::vector<std::size_t> ties;  // flat indices skipped as kinks
};

/// Central differences of f at x against `analytic`, one coordinate at a time.
GradCheckReport finite_diff_check(const std::function<double(std::span<const double>)>& f, std::span<const double> x,
                                  std::span<const double> analytic, const GradCheckOptions& opts = {});

/// `loss(store, want_grad)` returns the loss and, when asked, leaves its
/// gradient in store grads (the harness zeroes them first). Every value of
/// every parameter is checked; the store is restored afterwards.
GradCheckReport finite_diff_check(const std::function<double(ParamStore&, bool)>& loss, ParamStore& store,
                                  const GradCheckOptions& opts = {});

}  // namespace caire::ndiff
