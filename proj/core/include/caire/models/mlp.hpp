#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "caire/ndiff/params.hpp"
#include "caire/seqcore/rng.hpp"

namespace caire::models {

/// Layer inputs and pre-activations of one Mlp evaluation, flattened.
struct MlpTrace {
  std::vector<double> inputs;
  std::vector<double> pre;
};

/// Stack of linear layers named prefix.ff0, prefix.ff1, ... with SELU between
/// layers. The last layer is linear unless `activate_last`.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::string prefix, std::vector<std::size_t> dims, bool activate_last = false);

  std::size_t in_dim() const noexcept { return dims_.front(); }
  std::size_t out_dim() const noexcept { return dims_.back(); }
  std::size_t layers() const noexcept { return dims_.size() - 1; }
  std::string weight_name(std::size_t layer) const;
  std::string bias_name(std::size_t layer) const;

  void add_params(ndiff::ParamStore& store) const;
  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  void init_params(ndiff::ParamStore& store, seqcore::Rng& rng) const;
  /// Binds parameter storage; call again if the store is rebuilt.
  void prepare(ndiff::ParamStore& store);

  void forward(const double* x, double* y, MlpTrace* trace = nullptr) const;
  /// Adds parameter gradients into the store. grad_x may be null.
  void backward(const MlpTrace& trace, const double* grad_y, double* grad_x) const;

 private:
  std::string prefix_;
  std::vector<std::size_t> dims_;
  bool activate_last_ = false;
  std::vector<ndiff::Param*> weights_, biases_;
  std::vector<std::size_t> in_offset_, pre_offset_;
};

}  // namespace caire::models
