#include "caire/ndiff/params.hpp"

#include <algorithm>
#include <cmath>

#include "caire/errors.hpp"
#include "caire/ndiff/layers.hpp"

namespace caire::ndiff {

Param& ParamStore::add(std::string name, std::vector<std::size_t> shape, PriorSpec prior, bool log_scale) {
  if (index_.contains(name)) throw Error("duplicate parameter name '" + name + "'");
  index_.emplace(name, params_.size());
  Array value(shape);
  Array grad(std::move(shape));
  params_.push_back(Param{std::move(name), std::move(value), std::move(grad), prior, log_scale});
  return params_.back();
}

bool ParamStore::contains(std::string_view name) const { return index_.contains(std::string(name)); }

Param& ParamStore::at(std::string_view name) {
  const auto it = index_.find(std::string(name));
  if (it == index_.end()) throw Error("unknown parameter '" + std::string(name) + "'");
  return params_[it->second];
}

const Param& ParamStore::at(std::string_view name) const {
  const auto it = index_.find(std::string(name));
  if (it == index_.end()) throw Error("unknown parameter '" + std::string(name) + "'");
  return params_[it->second];
}

std::size_t ParamStore::total_values() const noexcept {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.grad.fill(0.0);
}

double param_log_prior(const Param& p, double stored, double* d_stored) {
  double d = 0.0, lp = 0.0;
  const double x = p.log_scale ? std::exp(stored) : stored;
  switch (p.prior.family) {
    case PriorFamily::kNone:
      break;
    case PriorFamily::kNormal:
      lp = normal_logprior(x, p.prior.mean, p.prior.scale, &d);
      break;
    case PriorFamily::kLogNormal:
      lp = lognormal_logprior(x, p.prior.mean, p.prior.scale, &d);
      break;
  }
  if (p.log_scale) d *= x;
  if (d_stored) *d_stored = d;
  return lp;
}

double ParamStore::log_prior(const std::vector<std::string>& names, bool accumulate_grad, double weight) {
  double total = 0.0;
  for (auto& p : params_) {
    if (p.prior.family == PriorFamily::kNone) continue;
    if (!names.empty() && std::find(names.begin(), names.end(), p.name) == names.end()) continue;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      double d = 0.0;
      total += param_log_prior(p, p.value[i], accumulate_grad ? &d : nullptr);
      if (accumulate_grad) p.grad[i] -= weight * d;
    }
  }
  return weight * total;
}

}  // namespace caire::ndiff
