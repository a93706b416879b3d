#pragma once

#include <stdexcept>
#include <string>

namespace tollopt {

// Malformed inputs: unknown references, violated invariants, bad files.
struct InputError : std::runtime_error {
  explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

// Positive demand on an origin-destination pair with no route.
struct InfeasibleDemandError : InputError {
  explicit InfeasibleDemandError(const std::string& msg) : InputError(msg) {}
};

// Iterative solver hit its iteration cap; carries the last relative gap.
struct ConvergenceError : std::runtime_error {
  ConvergenceError(const std::string& msg, double gap)
      : std::runtime_error(msg), last_gap(gap) {}
  double last_gap;
};

// Numerical breakdown inside the LP solver, distinct from infeasibility.
struct LpError : std::runtime_error {
  explicit LpError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace tollopt
