#pragma once

#include <cstddef>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace ars {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed frame or expression text. Line and column are 1-based.
class ParseError : public Error {
public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : Error(what + " at line " + std::to_string(line) + ", column " +
              std::to_string(column)),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

private:
  std::size_t line_;
  std::size_t column_;
};

/// Division by zero, log/sqrt domain violations during evaluation.
class EvalError : public Error {
public:
  using Error::Error;
};

/// An operation's documented precondition does not hold for its inputs.
class PreconditionError : public Error {
public:
  using Error::Error;
};

/// The metric or volume was requested on the singular set.
class SingularSetError : public PreconditionError {
public:
  using PreconditionError::PreconditionError;
};

/// A numerical procedure finished without meeting its tolerance.
inline std::string format_residual(double r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", r);
  return buf;
}

class ConvergenceError : public Error {
public:
  ConvergenceError(const std::string& what, double best_residual)
      : Error(what + " (best residual " + format_residual(best_residual) + ")"),
        best_residual_(best_residual) {}

  double best_residual() const noexcept { return best_residual_; }

private:
  double best_residual_;
};

/// A traced trajectory reached a zero of its driving vector field.
class FieldVanishesError : public Error {
public:
  using Error::Error;
};

}  // namespace ars
