#include "caire/models/mlp.hpp"

#include <algorithm>
#include <cmath>

#include "caire/errors.hpp"
#include "caire/ndiff/layers.hpp"

namespace caire::models {

Mlp::Mlp(std::string prefix, std::vector<std::size_t> dims, bool activate_last)
    : prefix_(std::move(prefix)), dims_(std::move(dims)), activate_last_(activate_last) {
  if (dims_.size() < 2) throw ConfigError(prefix_ + ": an Mlp needs at least one layer");
  for (std::size_t d : dims_)
    if (d == 0) throw ConfigError(prefix_ + ": layer widths must be positive");
  std::size_t in = 0, pre = 0;
  for (std::size_t l = 0; l < layers(); ++l) {
    in_offset_.push_back(in);
    pre_offset_.push_back(pre);
    in += dims_[l];
    pre += dims_[l + 1];
  }
  in_offset_.push_back(in);
  pre_offset_.push_back(pre);
}

std::string Mlp::weight_name(std::size_t layer) const { return prefix_ + ".ff" + std::to_string(layer) + ".w"; }
std::string Mlp::bias_name(std::size_t layer) const { return prefix_ + ".ff" + std::to_string(layer) + ".b"; }

void Mlp::add_params(ndiff::ParamStore& store) const {
  for (std::size_t l = 0; l < layers(); ++l) {
    store.add(weight_name(l), {dims_[l + 1], dims_[l]});
    store.add(bias_name(l), {dims_[l + 1]});
  }
}

void Mlp::init_params(ndiff::ParamStore& store, seqcore::Rng& rng) const {
  for (std::size_t l = 0; l < layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims_[l]));
    for (auto* a : {&store.value(weight_name(l)), &store.value(bias_name(l))})
      for (double& v : a->values()) v = bound * (2.0 * rng.uniform() - 1.0);
  }
}

void Mlp::prepare(ndiff::ParamStore& store) {
  weights_.clear();
  biases_.clear();
  for (std::size_t l = 0; l < layers(); ++l) {
    weights_.push_back(&store.at(weight_name(l)));
    biases_.push_back(&store.at(bias_name(l)));
  }
}

void Mlp::forward(const double* x, double* y, MlpTrace* trace) const {
  if (weights_.empty()) throw Error(prefix_ + ": prepare() was not called");
  std::vector<double> cur(x, x + dims_[0]), next;
  if (trace) {
    trace->inputs.resize(in_offset_.back());
    trace->pre.resize(pre_offset_.back());
  }
  for (std::size_t l = 0; l < layers(); ++l) {
    const std::size_t in = dims_[l], out = dims_[l + 1];
    const double* w = weights_[l]->value.data();
    const double* b = biases_[l]->value.data();
    if (trace) std::copy(cur.begin(), cur.end(), trace->inputs.begin() + static_cast<std::ptrdiff_t>(in_offset_[l]));
    next.assign(out, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      double s = b[o];
      const double* row = w + o * in;
      for (std::size_t i = 0; i < in; ++i) s += row[i] * cur[i];
      next[o] = s;
    }
    if (trace) std::copy(next.begin(), next.end(), trace->pre.begin() + static_cast<std::ptrdiff_t>(pre_offset_[l]));
    if (l + 1 < layers() || activate_last_)
      for (double& v : next) v = ndiff::selu(v);
    cur.swap(next);
  }
  std::copy(cur.begin(), cur.end(), y);
}

void Mlp::backward(const MlpTrace& trace, const double* grad_y, double* grad_x) const {
  std::vector<double> g(grad_y, grad_y + dims_.back()), gin;
  for (std::size_t l = layers(); l-- > 0;) {
    const std::size_t in = dims_[l], out = dims_[l + 1];
    const double* pre = trace.pre.data() + pre_offset_[l];
    if (l + 1 < layers() || activate_last_)
      for (std::size_t o = 0; o < out; ++o) g[o] *= ndiff::selu_grad(pre[o]);
    const double* x = trace.inputs.data() + in_offset_[l];
    const double* w = weights_[l]->value.data();
    double* dw = weights_[l]->grad.data();
    double* db = biases_[l]->grad.data();
    gin.assign(in, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      const double go = g[o];
      if (go == 0.0) continue;
      db[o] += go;
      double* drow = dw + o * in;
      const double* row = w + o * in;
      for (std::size_t i = 0; i < in; ++i) {
        drow[i] += go * x[i];
        gin[i] += go * row[i];
      }
    }
    g.swap(gin);
  }
  if (grad_x) std::copy(g.begin(), g.end(), grad_x);
}

}  // namespace caire::models
