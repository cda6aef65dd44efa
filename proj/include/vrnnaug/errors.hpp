#pragma once

#include <stdexcept>
#include <string>

namespace vrnnaug {

/// Base class for every error raised by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Tensor shapes or an operation contract were violated.
struct DimensionError : Error {
  using Error::Error;
};

/// A computation produced NaN/Inf, or consumed a non-finite gradient.
struct NumericError : Error {
  using Error::Error;
};

/// Input data is malformed or unusable (files, columns, splits).
struct DataError : Error {
  using Error::Error;
};

/// Invalid command-line arguments or configuration values.
struct ArgumentError : Error {
  using Error::Error;
};

}  // namespace vrnnaug
