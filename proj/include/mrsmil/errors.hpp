#pragma once

#include <stdexcept>
#include <string>

namespace mrsmil {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor or layer shapes do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A layer, model or run was configured with values it cannot honour.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Invalid argument to a data/eval operation (empty bag, too few patients, ...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Operation called in the wrong order, e.g. backward before forward.
class StateError : public Error {
 public:
  using Error::Error;
};

// Non-finite or otherwise unusable input values.
class InputError : public Error {
 public:
  using Error::Error;
};

// Spectrum with zero variance cannot be standardized.
class DegenerateInputError : public InputError {
 public:
  using InputError::InputError;
};

// Malformed file content; the message carries the line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Metric is undefined for the given input (e.g. AUC with a single class).
class UndefinedMetricError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

// Training diverged (non-finite loss or gradient).
class TrainingError : public Error {
 public:
  using Error::Error;
};

// Requested operation is not available for this model variant.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

}  // namespace mrsmil
