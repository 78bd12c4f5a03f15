#pragma once

#include <stdexcept>
#include <string>

namespace wbsde {

// Invalid user-supplied configuration (grids, parameters, schemas).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A domain invariant was violated by supplied data.
struct InvariantError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Forward simulation produced a non-finite state.
struct SimulationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Least-squares projection could not be stabilized.
struct RegressionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Backward solver failed (inner fixed point or Picard divergence).
struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace wbsde
