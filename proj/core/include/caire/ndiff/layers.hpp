#pragma once

#include <cstddef>
#include <vector>

#include "caire/ndiff/array.hpp"

namespace caire::ndiff {

// Dense reference layers. Inputs to conv1d are (length, in_channels); filters
// are (out_channels, kernel, in_channels); outputs are (length - kernel + 1,
// out_channels). Backward functions accumulate into the gradient arrays.

Array conv1d(const Array& input, const Array& filters, const Array& bias);
void conv1d_backward(const Array& input, const Array& filters, const Array& grad_out, Array& grad_input,
                     Array& grad_filters, Array& grad_bias);

inline constexpr double kSeluAlpha = 1.6732632423543772848170429916717;
inline constexpr double kSeluScale = 1.0507009873554804934193349852946;

double selu(double x) noexcept;
/// Derivative of selu at x. Uses the right-hand branch at exactly zero.
double selu_grad(double x) noexcept;
Array selu(const Array& x);
/// grad_x = grad_y * selu'(x), elementwise.
Array selu_backward(const Array& x, const Array& grad_y);

struct MaxPoolResult {
  Array values;                    // (channels)
  std::vector<std::size_t> argmax;  // row index per channel
};

/// Max over rows [0, valid_rows) of a (rows, channels) array. Ties go to the
/// lowest row index. `valid_rows == 0` means all rows.
MaxPoolResult maxpool_positions(const Array& x, std::size_t valid_rows = 0);
/// Routes grad (channels) to the argmax rows; other rows get zero.
Array maxpool_backward(const MaxPoolResult& pooled, const Array& grad, std::size_t rows);

/// y = W x + b with W (out, in).
Array linear(const Array& x, const Array& weight, const Array& bias);
void linear_backward(const Array& x, const Array& weight, const Array& grad_y, Array& grad_x, Array& grad_weight,
                     Array& grad_bias);

double sigmoid(double x) noexcept;
/// log(sigmoid(x)) without overflow.
double log_sigmoid(double x) noexcept;

/// log Bern(s; sigmoid(logit)). Derivative in logit is s - sigmoid(logit).
double bernoulli_loglik_logit(double s, double logit) noexcept;
/// log Bern(s; p). Throws NumericError unless 0 < p < 1.
double bernoulli_loglik(double s, double p);

struct GaussianGrad {
  double d_value, d_mean, d_scale;
};
/// log N(value; mean, scale) with scale the standard deviation. Throws
/// NumericError unless scale > 0.
double gaussian_loglik(double value, double mean, double scale);
GaussianGrad gaussian_loglik_grad(double value, double mean, double scale);

/// Normal log density used as a prior; returns the value and writes d/dx.
double normal_logprior(double x, double mean, double scale, double* d_x = nullptr);
/// LogNormal(mu, sigma) log density at x > 0; writes d/dx.
double lognormal_logprior(double x, double mu, double sigma, double* d_x = nullptr);

}  // namespace caire::ndiff
