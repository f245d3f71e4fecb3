#pragma once

#include <stdexcept>
#include <string>

namespace fairproj {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// An iterative routine hit its cap; `residual` is the last measured residual.
class ConvergenceFailure : public Error {
 public:
  ConvergenceFailure(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// A user-supplied divergence handle produced a non-finite value.
class InvalidDivergence : public Error {
 public:
  using Error::Error;
};

/// A group/class marginal needed by a constraint row is zero.
class DegenerateMarginal : public Error {
 public:
  using Error::Error;
};

class InfeasibilityDiagnostic : public Error {
 public:
  using Error::Error;
};

class NumericBlowup : public Error {
 public:
  using Error::Error;
};

/// A rate whose conditioning event has no samples.
class UndefinedRate : public Error {
 public:
  using Error::Error;
};

class InvalidModel : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

}  // namespace fairproj
