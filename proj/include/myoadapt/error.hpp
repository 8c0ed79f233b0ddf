#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace myoadapt {

// Invalid configuration: bad flags, overlapping repetition sets, too few
// items per class for the requested folds.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input data could not be read or does not satisfy its schema.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SchemaError : public DataError {
 public:
  using DataError::DataError;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : DataError(what + " (line " + std::to_string(line) + ")"), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Argument outside the mathematical domain of an operation (empty window,
// dimension mismatch, out-of-range label).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A linear system could not be solved reliably.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, double condition_estimate)
      : std::runtime_error(what + " (reciprocal condition estimate " +
                           std::to_string(condition_estimate) + ")"),
        rcond_(condition_estimate) {}

  double reciprocal_condition() const noexcept { return rcond_; }

 private:
  double rcond_;
};

}  // namespace myoadapt
