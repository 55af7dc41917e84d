#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nlh/cell.hpp"
#include "nlh/coefficients.hpp"
#include "nlh/grid.hpp"
#include "nlh/kernel.hpp"
#include "nlh/verdict.hpp"

namespace nlh {

/// Uniform grid on the box [-R, R)^d with m points per axis, x = -R + j Delta.
/// Flat order matches TorusGrid (axis 0 fastest).
struct SampleGrid {
    int dim = 1;
    double half_width = 0.0;
    int points = 0;

    double spacing() const { return 2.0 * half_width / points; }
    std::size_t size() const;
    MultiIndex multi_index(std::size_t flat) const;
    Point node(std::size_t flat) const;
    /// Delta^d.
    double cell_volume() const;
};

SampleGrid make_sample_grid(int dim, double half_width, int points);
/// Smallest grid with Delta <= eps / nodes_per_cell.
SampleGrid sample_grid_for(int dim, double half_width, double eps, int nodes_per_cell);

/// f(x) = amplitude * exp(-|x|^2 / (2 width^2)).
struct GaussianSource {
    double amplitude = -1.0;
    double width = 0.70710678118654752;

    double operator()(const Point& x, int dim) const;
    Eigen::VectorXd sample(const SampleGrid& grid) const;
};

struct HomogProblem {
    Kernel kernel;
    CoefficientSpec lambda;
    CoefficientSpec mu;
    double half_width = 10.0;
    int nodes_per_cell = 8;
    double shift = 1.0;  // m in (L - m) u = f
    GaussianSource source;
    double tail_mass = 1e-8;
};

/// Dense L^eps on a SampleGrid. Off-diagonal entries are
/// eps^{-d-2} a((x_i - x_j)/eps) lambda(x_i/eps) mu(x_j/eps) Delta^d; jumps
/// leaving the box are dropped and the diagonal makes every row sum vanish.
class DiscreteNonlocalOperator {
public:
    DiscreteNonlocalOperator(SampleGrid grid, double eps, Eigen::MatrixXd matrix, Eigen::VectorXd nu);

    const SampleGrid& grid() const noexcept { return grid_; }
    double eps() const noexcept { return eps_; }
    const Eigen::MatrixXd& matrix() const noexcept { return l_; }
    /// nu(x_i / eps) = mu / lambda at the nodes.
    const Eigen::VectorXd& nu() const noexcept { return nu_; }

    /// (L u)_i = sum_{j != i} L_ij (u_j - u_i); vanishes exactly on constants.
    Eigen::VectorXd apply(const Eigen::VectorXd& u) const;
    /// <u, v>_nu = Delta^d sum nu_i u_i v_i.
    double weighted_dot(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const;
    double weighted_norm(const Eigen::VectorXd& u) const;

private:
    SampleGrid grid_;
    double eps_;
    Eigen::MatrixXd l_;
    Eigen::VectorXd nu_;
};

/// Throws ResolutionError if Delta > eps / min_nodes_per_cell and
/// TruncationError if the kernel at scale eps reaches past the box.
DiscreteNonlocalOperator assemble_Leps(const SampleGrid& grid, double eps, const Kernel& kernel,
                                       const CoefficientSpec& lambda, const CoefficientSpec& mu,
                                       double tail_mass = 1e-8, int min_nodes_per_cell = 8);

struct StructureReport {
    double row_sum_defect = 0.0;     // max_i |sum_j L_ij| / max_i |L_ii|
    double constant_defect = 0.0;    // max_i |(L 1)_i|
    double asymmetry = 0.0;          // max_ij |nu_i L_ij - nu_j L_ji|
    double asymmetry_relative = 0.0; // asymmetry / max_i |nu_i L_ii|
    double max_quadratic = 0.0;      // max over samples of <L u, u>_nu / <u, u>_nu
    int samples = 0;
    bool negative = false;
};

StructureReport check_structure(const DiscreteNonlocalOperator& op, int samples = 100,
                                std::uint64_t seed = 20240601);

/// Discrete L^2 norm Delta^{d/2} ||u||_2.
double discrete_l2(const SampleGrid& grid, const Eigen::VectorXd& u);

struct ResolventSolution {
    Eigen::VectorXd u;
    double residual = 0.0;  // ||(L - m) u - f|| / ||f||
    double weighted_norm_u = 0.0;
    double weighted_norm_f = 0.0;
};

/// (L - m) u = f by dense LU; throws SolverBreakdownError if the residual
/// exceeds 1e-10 relative.
ResolventSolution solve_resolvent_eps(const DiscreteNonlocalOperator& op, double m, const Eigen::VectorXd& f);

struct LimitSolution {
    Eigen::VectorXd u;
    Eigen::MatrixXd gradient;  // N x d
    Eigen::MatrixXd hessian;   // N x d^2, component i*d + j
    double residual = 0.0;     // ||Theta:grad grad u - m u - f|| / ||f||
};

/// Theta:grad grad u - m u = f on the periodized box, exactly per Fourier mode.
LimitSolution solve_limit_resolvent(const Eigen::MatrixXd& theta, double m, const Eigen::VectorXd& f,
                                    const SampleGrid& grid);

/// Spectral gradient and Hessian of a grid function on the periodized box.
void spectral_derivatives(const SampleGrid& grid, const Eigen::VectorXd& u, Eigen::MatrixXd& gradient,
                          Eigen::MatrixXd& hessian);

/// exp(t Theta:grad grad) f, exact per Fourier mode.
Eigen::VectorXd limit_semigroup(const Eigen::MatrixXd& theta, const Eigen::VectorXd& f, const SampleGrid& grid,
                                double t);

/// v = u0 + eps kappa1(x/eps).grad u0 + eps^2 kappa2(x/eps):grad grad u0 with
/// kappa fields interpolated periodically.
Eigen::VectorXd corrector_expansion(const LimitSolution& u0, const PeriodicField& kappa1,
                                    const PeriodicField& kappa2, double eps, const SampleGrid& grid);

/// Discrete L^2 norm of L^eps v - Theta:grad grad u0.
double main_lemma_residual(const DiscreteNonlocalOperator& op, const Eigen::VectorXd& v,
                           const Eigen::MatrixXd& theta, const LimitSolution& u0);

struct ResolventPoint {
    double eps = 0.0;
    int points = 0;
    double spacing = 0.0;
    double error_l2 = 0.0;
    double error_sup = 0.0;
    double phi_norm = 0.0;
    double corrector_gap = 0.0;  // ||v - u0||
    double solver_residual = 0.0;
    double limit_residual = 0.0;
    double weighted_norm_u = 0.0;
    double weighted_norm_f = 0.0;
    double runtime_s = 0.0;
};

struct ResolventStudy {
    double shift = 0.0;
    std::vector<ResolventPoint> points;
    std::vector<StudyVerdict> verdicts;

    bool pass() const;
};

struct StudyOptions {
    unsigned threads = 1;
    /// Required final/initial error ratio.
    double final_ratio_max = 1.0 / 3.0;
    /// Required error ratio between consecutive eps.
    double step_ratio_max = 0.9;
    /// Errors below this are treated as exactly converged.
    double zero_floor = 1e-14;
};

/// Throws ConfigError unless eps values are positive and strictly decreasing.
void require_decreasing(const std::vector<double>& eps);

ResolventStudy resolvent_convergence_study(const HomogProblem& problem, const CellSolution& cell,
                                           const std::vector<double>& eps, const StudyOptions& options = {});

struct SemigroupPoint {
    double eps = 0.0;
    int points = 0;
    double sup_error_l2 = 0.0;    // max over times of ||T^eps f - T^0 f||
    double sup_error_max = 0.0;   // same with the sup norm
    double mass_drift = 0.0;      // max |<u(t) - f, nu>| / |<f, nu>|
    double max_norm_ratio = 0.0;  // max ||u(t)||_nu / ||f||_nu
    double runtime_s = 0.0;
    std::vector<double> error_by_time;
};

struct SemigroupStudy {
    double horizon = 1.0;
    double dt = 0.1;
    std::vector<double> times;
    std::vector<SemigroupPoint> points;
    std::vector<StudyVerdict> verdicts;

    bool pass() const;
};

struct SemigroupOptions {
    double horizon = 1.0;
    double dt = 0.1;
    double mass_tol = 1e-8;
    unsigned threads = 1;
};

/// Throws IntegratorError if the weighted norm grows along the discrete flow.
SemigroupStudy semigroup_study(const HomogProblem& problem, const Eigen::MatrixXd& theta,
                               const std::vector<double>& eps, const SemigroupOptions& options = {});

}  // namespace nlh
