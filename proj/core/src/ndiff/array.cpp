#include "caire/ndiff/array.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "caire/errors.hpp"

namespace caire::ndiff {

namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

Array::Array(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), values_(product(shape_), fill) {}

Array::Array(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (values_.size() != product(shape_))
    throw ShapeError("array of shape " + shape_string(shape_) + " given " + std::to_string(values_.size()) +
                     " values");
}

void Array::fill(double v) noexcept { std::fill(values_.begin(), values_.end(), v); }

void Array::check_finite(std::string_view context) const {
  for (std::size_t i = 0; i < values_.size(); ++i)
    if (!std::isfinite(values_[i]))
      throw NumericError(std::string(context) + ": non-finite value at flat index " + std::to_string(i));
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

}  // namespace caire::ndiff
