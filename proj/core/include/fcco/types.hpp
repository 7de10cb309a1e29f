#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace fcco {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using BlockId = std::size_t;

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Hyperparameters or sizes outside their admissible range.
class InvalidConfig : public Error {
 public:
  using Error::Error;
};

// Caller broke an API precondition (dimension mismatch, missing batch values).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data.
class DataError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& what)
      : DataError(path + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class SchemaError : public DataError {
 public:
  using DataError::DataError;
};

// A solver run stopped early: non-finite gradient or divergence guard.
class RunAborted : public Error {
 public:
  enum class Reason { NonFinite, Diverged };

  RunAborted(Reason reason, std::size_t iteration, const std::string& what)
      : Error(what + " (iteration " + std::to_string(iteration) + ")"),
        reason_(reason),
        iteration_(iteration) {}

  Reason reason() const noexcept { return reason_; }
  std::size_t iteration() const noexcept { return iteration_; }

 private:
  Reason reason_;
  std::size_t iteration_;
};

// Undefined metric, e.g. TPAUC with an empty restriction.
class MetricUndefined : public Error {
 public:
  using Error::Error;
};

inline bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace fcco
