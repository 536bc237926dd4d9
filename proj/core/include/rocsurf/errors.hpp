#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace rocsurf {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input: malformed files, invalid datasets, violated preconditions.
/// The CLI maps these to exit code 2.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure on valid input. The CLI maps these to exit code 3.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class ParseError : public InputError {
 public:
  ParseError(std::size_t row, std::string column, const std::string& what)
      : InputError("row " + std::to_string(row) + ", column '" + column + "': " + what),
        row_(row),
        column_(std::move(column)) {}

  std::size_t row() const noexcept { return row_; }
  const std::string& column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

class ValidationError : public InputError {
 public:
  using InputError::InputError;
};

class ContractError : public InputError {
 public:
  using InputError::InputError;
};

class SeparationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DegenerateDenominator : public NumericalError {
 public:
  explicit DegenerateDenominator(int k)
      : NumericalError("degenerate denominator: sum of pseudo-disease weights for class " +
                       std::to_string(k) + " is numerically zero"),
        k_(k) {}
  /// Denominator not tied to a single class (k = 0).
  explicit DegenerateDenominator(const std::string& what) : NumericalError(what), k_(0) {}
  int klass() const noexcept { return k_; }

 private:
  int k_;
};

class DegenerateTheta : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SingularBread : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SingularCovariance : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class QuadratureError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// A self-check inside the library failed; indicates a bug, not bad input.
class InternalError : public Error {
 public:
  using Error::Error;
};

class AllReplicatesFailed : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace rocsurf
