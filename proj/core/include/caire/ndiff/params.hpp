#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "caire/ndiff/array.hpp"

namespace caire::ndiff {

enum class PriorFamily { kNone, kNormal, kLogNormal };

struct PriorSpec {
  PriorFamily family = PriorFamily::kNone;
  double mean = 0.0;
  double scale = 1.0;
};

struct Param {
  std::string name;
  Array value;
  Array grad;
  PriorSpec prior;
  /// The stored value is log of the quantity the prior is placed on.
  bool log_scale = false;
};

/// Named parameters in insertion order.
class ParamStore {
 public:
  /// Adds a zero-initialised parameter. Throws Error on a duplicate name.
  Param& add(std::string name, std::vector<std::size_t> shape, PriorSpec prior = {}, bool log_scale = false);

  bool contains(std::string_view name) const;
  Param& at(std::string_view name);
  const Param& at(std::string_view name) const;
  Array& value(std::string_view name) { return at(name).value; }
  const Array& value(std::string_view name) const { return at(name).value; }
  Array& grad(std::string_view name) { return at(name).grad; }

  std::vector<Param>& entries() noexcept { return params_; }
  const std::vector<Param>& entries() const noexcept { return params_; }
  std::size_t size() const noexcept { return params_.size(); }
  std::size_t total_values() const noexcept;

  void zero_grad();
  /// weight * sum of log priors over parameters named in `names` (all if
  /// empty). With `accumulate_grad`, the negated derivative is added to grads
  /// so they stay gradients of a loss to be minimised.
  double log_prior(const std::vector<std::string>& names = {}, bool accumulate_grad = false, double weight = 1.0);

 private:
  std::vector<Param> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Prior log density and derivative for one stored value.
double param_log_prior(const Param& p, double stored, double* d_stored);

}  // namespace caire::ndiff
