#pragma once

#include <stdexcept>
#include <string>

namespace swtaxis {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Input violates a documented precondition (mean constraint, wrong field kind, ...).
struct PreconditionError : Error {
  using Error::Error;
};

// Iterative solver, root finder or time stepper failed to meet its target.
struct SolverError : Error {
  using Error::Error;
};

// Time step violates the explicit stability bound; carries a usable step.
struct StepRejected : SolverError {
  StepRejected(const std::string& what, double suggested) : SolverError(what), suggested_dt(suggested) {}
  double suggested_dt;
};

// Bad configuration value, file or expression.
struct ConfigError : Error {
  using Error::Error;
};

// A post-condition check failed on a computed result.
struct InvariantError : Error {
  using Error::Error;
};

}  // namespace swtaxis
