#pragma once

#include <stdexcept>
#include <string>

namespace darksteady {

// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

/// Thrown by the fixed-step integrator when dt violates the spectral-bound guard.
class StepSizeError : public Error {
 public:
  StepSizeError(const std::string& what, double suggested_dt)
      : Error(what), suggested_dt_(suggested_dt) {}
  double suggested_dt() const noexcept { return suggested_dt_; }

 private:
  double suggested_dt_;
};

}  // namespace darksteady
