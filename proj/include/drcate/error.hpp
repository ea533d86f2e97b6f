#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace drcate {

// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Precondition violated by the caller (bad shape, out-of-range value).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Iterative fit did not converge, or diverged (separation).
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

// Design matrix or Hessian is rank deficient.
class RankError : public Error {
 public:
  using Error::Error;
};

// Kernel-weighted sum has a zero denominator at the query.
class EmptyWindowError : public Error {
 public:
  using Error::Error;
};

// Dimension-reduction matrix could not be extracted.
class DegenerateStructureError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Input did not parse; row/column are 1-based, 0 when not applicable.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t row = 0, std::size_t column = 0)
      : Error(format(what, row, column)), row_(row), column_(column) {}

  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

 private:
  static std::string format(const std::string& what, std::size_t row, std::size_t column) {
    if (row == 0) return what;
    std::string out = what + " (row " + std::to_string(row);
    if (column != 0) out += ", column " + std::to_string(column);
    return out + ")";
  }

  std::size_t row_;
  std::size_t column_;
};

// Input parsed but violates the expected schema (e.g. non-binary treatment).
class SchemaError : public Error {
 public:
  using Error::Error;
};

}  // namespace drcate
