#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mecshield {

// Argument or shape violation (dimension mismatch, empty grid, bad sub-mode).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A classifier was queried before any neuron carried a label.
class NoLabelsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input data; line is 1-based, 0 when not tied to a line.
class DataError : public std::runtime_error {
 public:
  DataError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Missing or unexpected columns in a tabular input.
class SchemaError : public DataError {
 public:
  using DataError::DataError;
};

// Invalid run configuration; the message names the offending field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A policy reached an agent it was not addressed to.
class AddressingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Metrics could not be computed from an event log.
class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mecshield
