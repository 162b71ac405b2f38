#pragma once

#include <stdexcept>
#include <string>

namespace hypomimia {

// Bad arguments or configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input data or on-disk format (CLI exit code 3).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shape mismatch; a data error with both shapes in the message.
class ShapeError : public DataError {
 public:
  using DataError::DataError;
};

// Non-finite values where finite ones are required (CLI exit code 4).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hypomimia
