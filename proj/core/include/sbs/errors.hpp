#pragma once

#include <stdexcept>
#include <string>

namespace sbs {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller-supplied parameter violates an operation's precondition.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Input data does not match the expected schema (missing column, bad cell).
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// The frame cannot be used as given, e.g. two units share coordinates.
class DegenerateFrameError : public Error {
 public:
  using Error::Error;
};

/// An iterative procedure did not reach its tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Floating point degeneracy (underflow, non-finite intermediate).
class NumericError : public Error {
 public:
  using Error::Error;
};

/// An estimator is undefined for the supplied sample and probabilities.
class EstimatorError : public Error {
 public:
  using Error::Error;
};

/// Not enough usable observations for a fit.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

}  // namespace sbs
