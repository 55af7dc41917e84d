#pragma once

#include <stdexcept>
#include <string>

namespace nlh {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A kernel moment integral did not converge.
class MomentDivergenceError : public Error {
public:
    using Error::Error;
};

/// A lattice sum or box truncation could not reach the requested tolerance.
class TruncationError : public Error {
public:
    TruncationError(const std::string& what, double achieved)
        : Error(what), achieved_(achieved) {}
    double achieved() const noexcept { return achieved_; }

private:
    double achieved_;
};

/// Coefficient field violates 0 < alpha1 <= value <= alpha2.
class CoefficientBoundsError : public Error {
public:
    using Error::Error;
};

/// Two fields that must share a grid do not.
class GridMismatchError : public Error {
public:
    using Error::Error;
};

/// Grid too coarse, or dense storage would exceed the memory cap.
class ResolutionError : public Error {
public:
    using Error::Error;
};

/// Linear solve failed (singular beyond the expected rank-one deficiency).
class SolverBreakdownError : public Error {
public:
    using Error::Error;
};

/// Deflated Neumann iteration ran out of iterations.
class NonContractionError : public Error {
public:
    NonContractionError(const std::string& what, double rho)
        : Error(what), spectral_radius_(rho) {}
    double spectral_radius() const noexcept { return spectral_radius_; }

private:
    double spectral_radius_;
};

/// Second-order cell right-hand side is not orthogonal to mu.
class InconsistentThetaError : public Error {
public:
    using Error::Error;
};

/// Time integrator produced growth in the weighted norm.
class IntegratorError : public Error {
public:
    using Error::Error;
};

/// Monte Carlo request exceeds the configured jump budget.
class BudgetError : public Error {
public:
    BudgetError(const std::string& what, double expected_cost)
        : Error(what), expected_cost_(expected_cost) {}
    double expected_cost() const noexcept { return expected_cost_; }

private:
    double expected_cost_;
};

/// Invalid run configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace nlh
