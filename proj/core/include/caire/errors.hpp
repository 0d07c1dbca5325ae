#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace caire {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A sequence does not fit the encoding width, or is otherwise malformed.
class LengthError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. Carries the 1-based line number of the offending row.
class ParseError : public Error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : Error(file + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Invalid argument combination or missing configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A numeric computation produced NaN/Inf or left its domain.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Shape mismatch between arrays.
class ShapeError : public Error {
 public:
  using Error::Error;
};

}  // namespace caire
