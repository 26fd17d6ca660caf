#pragma once

#include <stdexcept>
#include <string>

namespace mstumor {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad or inconsistent configuration (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A structural hypothesis of the model does not hold (CLI exit code 3).
class HypothesisError : public Error {
 public:
  using Error::Error;
};

/// Point outside the domain of a singular function.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Solver breakdown (CLI exit code 4). `subsystem` names the failing piece,
/// e.g. "nutrient", "pressure", "cahn-hilliard:p", "prox".
class NumericalError : public Error {
 public:
  NumericalError(std::string subsystem, const std::string &what)
      : Error(subsystem + ": " + what), subsystem_(std::move(subsystem)) {}

  const std::string &subsystem() const noexcept { return subsystem_; }

 private:
  std::string subsystem_;
};

}  // namespace mstumor
