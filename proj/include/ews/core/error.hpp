#pragma once

#include <stdexcept>
#include <string>

namespace ews {

// Base class for every error raised by the toolkit. The CLI maps
// ValidationFailure subclasses to exit code 1 and everything else to 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationFailure : public Error {
 public:
  using Error::Error;
};

class ConfigError : public ValidationFailure {
 public:
  using ValidationFailure::ValidationFailure;
};

class ParseError : public ValidationFailure {
 public:
  ParseError(std::size_t row, std::string column, const std::string& what)
      : ValidationFailure("row " + std::to_string(row) + ", column '" + column + "': " + what),
        row_(row),
        column_(std::move(column)) {}

  std::size_t row() const noexcept { return row_; }
  const std::string& column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

class ValidationError : public ValidationFailure {
 public:
  using ValidationFailure::ValidationFailure;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double gap) : Error(what), gap_(gap) {}
  double duality_gap() const noexcept { return gap_; }

 private:
  double gap_;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

// A mixture component lost its support (tiny weight or a covariance that
// keeps hitting the eigenvalue floor).
class CollapseError : public Error {
 public:
  using Error::Error;
};

class SelectionError : public Error {
 public:
  using Error::Error;
};

}  // namespace ews
