#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace relarb {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent scenario configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Preference condition violated; equilibrium maps undefined.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

// Coefficient evaluation at a degenerate point.
class SingularityError : public Error {
 public:
  using Error::Error;
};

// Strategy outside the simplex in strict long-only mode.
class AdmissibilityError : public Error {
 public:
  using Error::Error;
};

class SimulationError : public Error {
 public:
  SimulationError(const std::string& what, std::size_t step)
      : Error(what + " at step " + std::to_string(step)), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class DeflatorError : public SimulationError {
 public:
  using SimulationError::SimulationError;
};

}  // namespace relarb
