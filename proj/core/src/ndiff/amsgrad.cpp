#include "caire/ndiff/amsgrad.hpp"

#include <algorithm>
#include <cmath>

#include "caire/errors.hpp"

namespace caire::ndiff {

AmsGradState make_amsgrad_state(const ParamStore& store, std::vector<std::string> names, AmsGradConfig config) {
  AmsGradState s;
  s.config = config;
  for (const auto& n : names) {
    const auto& shape = store.value(n).shape();
    s.m.emplace_back(shape);
    s.v.emplace_back(shape);
    s.v_hat.emplace_back(shape);
  }
  s.names = std::move(names);
  return s;
}

void amsgrad_step(ParamStore& store, AmsGradState& state) {
  for (const auto& n : state.names) {
    const auto& g = store.at(n).grad;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (!std::isfinite(g[i]))
        throw NumericError("non-finite gradient for parameter '" + n + "' at index " + std::to_string(i));
  }
  const auto& c = state.config;
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t k = 0; k < state.names.size(); ++k) {
    auto& p = store.at(state.names[k]);
    auto& m = state.m[k];
    auto& v = state.v[k];
    auto& vh = state.v_hat[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
      vh[i] = std::max(vh[i], v[i]);
      const double step = (m[i] / bc1) / (std::sqrt(vh[i] / bc2) + c.eps);
      p.value[i] -= c.lr * step + c.lr * c.weight_decay * p.value[i];
    }
  }
}

}  // namespace caire::ndiff
