#pragma once

#include <stdexcept>
#include <string>

namespace secant {

/// Argument outside the domain of a function (angles, radii, intensities).
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

/// Input violates a structural contract (non-convex cell, bad grid, bad file).
struct ContractError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Direction law cannot drive the requested computation.
struct DegenerateLawError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Numerical failure: non-convergence, instability, runaway trajectories.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct StabilityError : NumericalError {
    using NumericalError::NumericalError;
};

struct ResolutionError : NumericalError {
    using NumericalError::NumericalError;
};

/// The coefficient function of the transformed ODE changes sign on the grid.
struct TurningPointError : NumericalError {
    using NumericalError::NumericalError;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace secant
