#pragma once

#include <stdexcept>
#include <string>

namespace cmd {

/// Caller broke an interface contract (dimension mismatch, bad argument).
struct ContractError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A point lies outside a potential's domain (e.g. nonpositive coordinate
/// handed to an entropy-type potential).
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A dual vector lies outside the range of a potential's gradient map.
struct RangeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A Krylov solve produced non-finite coefficients and cannot continue.
struct BreakdownError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A solver step could not be completed (e.g. Krylov non-convergence).
struct StepError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid configuration (unknown ids, infeasible initial point, bad file).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace cmd
