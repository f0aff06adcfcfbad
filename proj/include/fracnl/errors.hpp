#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fracnl {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class IndexOutOfRange : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class SingularMatrix : public Error {
 public:
  using Error::Error;
};

class MissingDerivative : public Error {
 public:
  using Error::Error;
};

/// Newton iteration hit its cap. Carries the last residual sup-norm.
class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, double last_residual)
      : Error(what), last_residual_(last_residual) {}

  double last_residual() const noexcept { return last_residual_; }

 private:
  double last_residual_;
};

/// Failure of a single time step inside a march, tagged with the step index.
class StepFailure : public Error {
 public:
  StepFailure(std::size_t step, const std::string& what)
      : Error("step " + std::to_string(step) + ": " + what), step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace fracnl
