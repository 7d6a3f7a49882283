#pragma once

#include <stdexcept>
#include <string>

namespace nlsr {

/// Invalid grid, parameters, method/relaxation combination or config document.
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Non-finite values, blow-up guard trips, or malformed numerical inputs.
class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A fixed-point solve (Lawson, SLRI) did not reach its tolerance.
class ImplicitSolveError : public NumericError {
public:
  ImplicitSolveError(const std::string& what, double residual, int iterations)
      : NumericError(what), residual_(residual), iterations_(iterations) {}

  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }

private:
  double residual_;
  int iterations_;
};

/// The relaxation coefficient left (0, 2); the step is rejected.
class RelaxationFailure : public NumericError {
public:
  RelaxationFailure(const std::string& what, double gamma, double time)
      : NumericError(what), gamma_(gamma), time_(time) {}

  double gamma() const noexcept { return gamma_; }
  double time() const noexcept { return time_; }

private:
  double gamma_;
  double time_;
};

class CacheError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace nlsr
