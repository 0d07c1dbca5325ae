#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "caire/ndiff/array.hpp"
#include "caire/ndiff/params.hpp"

namespace caire::ndiff {

struct AmsGradConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// Optimizer state for a fixed group of parameters.
struct AmsGradState {
  AmsGradConfig config;
  std::vector<std::string> names;
  std::vector<Array> m, v, v_hat;
  std::uint64_t t = 0;
};

/// Creates zeroed moments for the named parameters of `store`.
AmsGradState make_amsgrad_state(const ParamStore& store, std::vector<std::string> names, AmsGradConfig config = {});

/// One bias-corrected AMSGrad step with decoupled weight decay, reading the
/// gradients held in `store`. Throws NumericError naming the parameter if a
/// gradient is not finite; nothing is modified in that case.
void amsgrad_step(ParamStore& store, AmsGradState& state);

}  // namespace caire::ndiff
