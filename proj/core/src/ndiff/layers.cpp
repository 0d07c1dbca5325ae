#include "caire/ndiff/layers.hpp"

#include <cmath>
#include <string>

#include "caire/errors.hpp"

namespace caire::ndiff {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

void check_conv_shapes(const Array& input, const Array& filters, const Array& bias) {
  require(input.rank() == 2, "conv1d input must be (length, channels), got " + shape_string(input.shape()));
  require(filters.rank() == 3, "conv1d filters must be (out, kernel, in), got " + shape_string(filters.shape()));
  require(filters.dim(2) == input.dim(1), "conv1d channel mismatch: input " + shape_string(input.shape()) +
                                              ", filters " + shape_string(filters.shape()));
  require(bias.rank() == 1 && bias.dim(0) == filters.dim(0), "conv1d bias must have one entry per output channel");
  require(filters.dim(1) >= 1 && filters.dim(1) <= input.dim(0),
          "conv1d kernel " + std::to_string(filters.dim(1)) + " longer than input length " +
              std::to_string(input.dim(0)));
}

}  // namespace

Array conv1d(const Array& input, const Array& filters, const Array& bias) {
  check_conv_shapes(input, filters, bias);
  const std::size_t len = input.dim(0), cin = input.dim(1), cout = filters.dim(0), k = filters.dim(1);
  const std::size_t nout = len - k + 1;
  Array out({nout, cout});
  for (std::size_t t = 0; t < nout; ++t)
    for (std::size_t o = 0; o < cout; ++o) {
      double acc = bias[o];
      for (std::size_t j = 0; j < k; ++j)
        for (std::size_t c = 0; c < cin; ++c) acc += filters(o, j, c) * input(t + j, c);
      out(t, o) = acc;
    }
  return out;
}

void conv1d_backward(const Array& input, const Array& filters, const Array& grad_out, Array& grad_input,
                     Array& grad_filters, Array& grad_bias) {
  const std::size_t len = input.dim(0), cin = input.dim(1), cout = filters.dim(0), k = filters.dim(1);
  const std::size_t nout = len - k + 1;
  require(grad_out.rank() == 2 && grad_out.dim(0) == nout && grad_out.dim(1) == cout, "conv1d grad_out shape");
  require(grad_input.same_shape(input) && grad_filters.same_shape(filters) && grad_bias.size() == cout,
          "conv1d gradient buffers have the wrong shape");
  for (std::size_t t = 0; t < nout; ++t)
    for (std::size_t o = 0; o < cout; ++o) {
      const double g = grad_out(t, o);
      if (g == 0.0) continue;
      grad_bias[o] += g;
      for (std::size_t j = 0; j < k; ++j)
        for (std::size_t c = 0; c < cin; ++c) {
          grad_filters(o, j, c) += g * input(t + j, c);
          grad_input(t + j, c) += g * filters(o, j, c);
        }
    }
}

double selu(double x) noexcept { return x > 0.0 ? kSeluScale * x : kSeluScale * kSeluAlpha * std::expm1(x); }

double selu_grad(double x) noexcept { return x >= 0.0 ? kSeluScale : kSeluScale * kSeluAlpha * std::exp(x); }

Array selu(const Array& x) {
  Array y = x;
  for (auto& v : y.values()) v = selu(v);
  return y;
}

Array selu_backward(const Array& x, const Array& grad_y) {
  require(x.same_shape(grad_y), "selu_backward shape mismatch");
  Array g = grad_y;
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= selu_grad(x[i]);
  return g;
}

MaxPoolResult maxpool_positions(const Array& x, std::size_t valid_rows) {
  require(x.rank() == 2 && x.dim(0) > 0, "maxpool input must be a non-empty (rows, channels) array");
  const std::size_t rows = valid_rows == 0 ? x.dim(0) : valid_rows;
  require(rows <= x.dim(0), "maxpool valid_rows exceeds input rows");
  const std::size_t ch = x.dim(1);
  MaxPoolResult r{Array({ch}), std::vector<std::size_t>(ch, 0)};
  for (std::size_t c = 0; c < ch; ++c) {
    double best = x(0, c);
    std::size_t arg = 0;
    for (std::size_t t = 1; t < rows; ++t)
      if (x(t, c) > best) {
        best = x(t, c);
        arg = t;
      }
    r.values[c] = best;
    r.argmax[c] = arg;
  }
  return r;
}

Array maxpool_backward(const MaxPoolResult& pooled, const Array& grad, std::size_t rows) {
  const std::size_t ch = pooled.argmax.size();
  require(grad.size() == ch, "maxpool_backward gradient size mismatch");
  Array g({rows, ch});
  for (std::size_t c = 0; c < ch; ++c) g(pooled.argmax[c], c) += grad[c];
  return g;
}

Array linear(const Array& x, const Array& weight, const Array& bias) {
  require(weight.rank() == 2 && weight.dim(1) == x.size() && bias.size() == weight.dim(0),
          "linear: weight " + shape_string(weight.shape()) + " incompatible with input of size " +
              std::to_string(x.size()));
  const std::size_t out = weight.dim(0), in = weight.dim(1);
  Array y({out});
  for (std::size_t o = 0; o < out; ++o) {
    double acc = bias[o];
    for (std::size_t i = 0; i < in; ++i) acc += weight(o, i) * x[i];
    y[o] = acc;
  }
  return y;
}

void linear_backward(const Array& x, const Array& weight, const Array& grad_y, Array& grad_x, Array& grad_weight,
                     Array& grad_bias) {
  const std::size_t out = weight.dim(0), in = weight.dim(1);
  require(grad_y.size() == out && grad_x.size() == in && grad_weight.same_shape(weight) && grad_bias.size() == out,
          "linear_backward buffers have the wrong shape");
  for (std::size_t o = 0; o < out; ++o) {
    const double g = grad_y[o];
    grad_bias[o] += g;
    for (std::size_t i = 0; i < in; ++i) {
      grad_weight(o, i) += g * x[i];
      grad_x[i] += g * weight(o, i);
    }
  }
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sigmoid(double x) noexcept { return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

double bernoulli_loglik_logit(double s, double logit) noexcept {
  return s * log_sigmoid(logit) + (1.0 - s) * log_sigmoid(-logit);
}

double bernoulli_loglik(double s, double p) {
  if (!(p > 0.0 && p < 1.0)) throw NumericError("Bernoulli probability must lie in (0, 1), got " + std::to_string(p));
  return s * std::log(p) + (1.0 - s) * std::log1p(-p);
}

double gaussian_loglik(double value, double mean, double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale))
    throw NumericError("Gaussian scale must be positive and finite, got " + std::to_string(scale));
  const double z = (value - mean) / scale;
  return -0.5 * z * z - std::log(scale) - kHalfLog2Pi;
}

GaussianGrad gaussian_loglik_grad(double value, double mean, double scale) {
  if (!(scale > 0.0)) throw NumericError("Gaussian scale must be positive, got " + std::to_string(scale));
  const double r = value - mean;
  const double inv2 = 1.0 / (scale * scale);
  return {-r * inv2, r * inv2, r * r * inv2 / scale - 1.0 / scale};
}

double normal_logprior(double x, double mean, double scale, double* d_x) {
  const double lp = gaussian_loglik(x, mean, scale);
  if (d_x) *d_x = -(x - mean) / (scale * scale);
  return lp;
}

double lognormal_logprior(double x, double mu, double sigma, double* d_x) {
  if (!(x > 0.0)) throw NumericError("LogNormal support is x > 0, got " + std::to_string(x));
  const double lx = std::log(x);
  const double lp = gaussian_loglik(lx, mu, sigma) - lx;
  if (d_x) *d_x = (-(lx - mu) / (sigma * sigma) - 1.0) / x;
  return lp;
}

}  // namespace caire::ndiff
