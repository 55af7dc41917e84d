#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nlh/coefficients.hpp"
#include "nlh/fold.hpp"
#include "nlh/grid.hpp"
#include "nlh/kernel.hpp"

namespace nlh {

enum class CellBackend { direct, deflated_neumann };

std::string_view to_string(CellBackend backend);
CellBackend parse_backend(std::string_view name);

inline constexpr std::size_t kDefaultMemoryCap = std::size_t{1} << 30;

/// Discrete cell operator A = K - G on the torus grid.
///
/// K_ij = ahat(xi_i - xi_j) mu_j h^d is the integral part and G = K 1 the
/// diagonal multiplier, so A annihilates constants row by row.
class CellOperator {
public:
    CellOperator(TorusGrid grid, Eigen::MatrixXd integral_part, Eigen::VectorXd mu);

    const TorusGrid& grid() const noexcept { return grid_; }
    const Eigen::MatrixXd& integral_part() const noexcept { return k_; }
    const Eigen::VectorXd& multiplier() const noexcept { return g_; }
    const Eigen::VectorXd& mu() const noexcept { return mu_; }

    Eigen::MatrixXd matrix() const;
    /// A applied column-wise.
    Eigen::MatrixXd apply(const Eigen::MatrixXd& phi) const;

private:
    TorusGrid grid_;
    Eigen::MatrixXd k_;
    Eigen::VectorXd g_;
    Eigen::VectorXd mu_;
};

/// Throws ResolutionError when the dense n^d x n^d matrix would exceed `memory_cap` bytes.
CellOperator assemble_cell_operator(const FoldedKernel& folded, const PeriodicField& mu,
                                    std::size_t memory_cap = kDefaultMemoryCap);

/// f(xi) = int_T bhat(xi - eta) mu(eta) d eta, one column per direction.
PeriodicField first_order_rhs(const PeriodicField& bhat, const PeriodicField& mu);

/// |<rhs_c, mu>_grid| per component.
Eigen::VectorXd check_solvability(const PeriodicField& rhs, const PeriodicField& mu);

struct SolverOptions {
    double solvability_rel_tol = 1e-8;
    double residual_rel_tol = 1e-10;
    int max_iterations = 10000;
    /// Smallest singular values are reported when n^d is at most this.
    std::size_t singular_value_limit = 1024;
};

struct SolveReport {
    CellBackend backend = CellBackend::direct;
    Eigen::VectorXd solvability;   // |<rhs, mu>| per component
    /// ||A x - P b|| / (||A|| ||x|| + ||b||) per component, P removing the part along mu.
    Eigen::VectorXd residual;
    int iterations = 0;            // deflated backend only
    double contraction = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> smallest_singular_values;
};

struct CorrectorResult {
    PeriodicField field;
    SolveReport report;
};

/// Deflated Neumann iteration for (P - E) x = g on H_1 = {psi : <mu q, psi> = 0}.
///
/// P = diag(1/q) K is row-stochastic; mu q is its left Perron vector.
class DeflatedIteration {
public:
    explicit DeflatedIteration(const CellOperator& op);

    const Eigen::MatrixXd& transition() const noexcept { return p_; }
    const Eigen::VectorXd& mass() const noexcept { return q_; }
    const Eigen::VectorXd& perron_weight() const noexcept { return w_; }

    /// Removes the component along constants using the weight mu q.
    Eigen::VectorXd project(const Eigen::VectorXd& psi) const;
    /// <mu q, psi> normalized by ||mu q|| ||psi||.
    double h1_defect(const Eigen::VectorXd& psi) const;
    /// Power-iteration estimate of the spectral radius of P on H_1.
    double estimate_contraction(int iterations = 300) const;

    /// Solves A x = f; result projected to H_1 (not yet mean-zero).
    Eigen::VectorXd solve(const Eigen::VectorXd& f, double rel_tol, int max_iterations,
                          int* iterations) const;

private:
    Eigen::MatrixXd p_;
    Eigen::VectorXd q_;
    Eigen::VectorXd w_;
};

/// Solves A x_c = rhs_c for every column; each column normalized to grid mean zero.
CorrectorResult solve_cell_system(const CellOperator& op, const PeriodicField& rhs, CellBackend backend,
                                  const SolverOptions& options, FieldRole role);

CorrectorResult solve_corrector1(const CellOperator& op, const PeriodicField& f, CellBackend backend,
                                 const SolverOptions& options = {});

struct ThetaResult {
    Eigen::MatrixXd theta;        // Theta = Theta_tilde / <mu/lambda>
    Eigen::MatrixXd theta_tilde;
    double nu_mean = 0.0;
};

/// Effective matrix from the solvability condition of the second-order cell problem.
ThetaResult compute_theta(const PeriodicField& kappa1, const FoldedKernel& folded,
                          const PeriodicField& lambda, const PeriodicField& mu);

struct DirichletForm {
    Eigen::MatrixXd form;       // I
    Eigen::MatrixXd theta_sym;  // I / (2 <mu/lambda>)
};

/// Symmetric part of Theta from the quadratic (Dirichlet) form, by direct
/// double summation over node pairs.
DirichletForm theta_dirichlet_form(const PeriodicField& kappa1, const FoldedKernel& folded,
                                   const PeriodicField& lambda, const PeriodicField& mu);

struct SecondOrderRhs {
    PeriodicField raw;          // component i*d + j
    PeriodicField symmetric;    // (raw_ij + raw_ji) / 2
    Eigen::MatrixXd solvability;  // |<raw_ij, mu>|
};

/// Right-hand side of the kappa_2 equations. Throws InconsistentThetaError when
/// some |<raw_ij, mu>| exceeds `rel_tol` times its scale.
SecondOrderRhs second_order_rhs(const Eigen::MatrixXd& theta, const PeriodicField& kappa1,
                                const PeriodicField& lambda, const PeriodicField& mu,
                                const FoldedKernel& folded, double rel_tol = 1e-8);

CorrectorResult solve_corrector2(const CellOperator& op, const PeriodicField& rhs, CellBackend backend,
                                 const SolverOptions& options = {});

struct CellProblem {
    Kernel kernel;
    CoefficientSpec lambda;
    CoefficientSpec mu;
    int n = 128;
    CellBackend backend = CellBackend::direct;
    double tail_tol = kDefaultTailTol;
    std::size_t memory_cap = kDefaultMemoryCap;
    SolverOptions solver;
    /// Recompute Theta on the n/2 grid to flag under-resolution.
    bool refinement_check = true;
    double refinement_rel_tol = 1e-6;
};

struct CellDiagnostics {
    CoefficientBounds bounds;
    int k_max = 0;
    double fold_tail_bound = 0.0;
    Eigen::VectorXd solvability1;
    Eigen::MatrixXd solvability2;
    SolveReport solve1;
    SolveReport solve2;
    double pd_margin = 0.0;                 // min eigenvalue of sym(Theta)
    double pd_margin_relative = 0.0;        // pd_margin / ||Theta||
    double dirichlet_rel_diff = 0.0;        // ||sym Theta - Theta_I|| / ||Theta||
    std::optional<double> refinement_rel_change;
    bool pd_margin_warning = false;
    std::string warning;
};

struct CellSolution {
    TorusGrid grid;
    PeriodicField lambda;
    PeriodicField mu;
    PeriodicField kappa1;
    PeriodicField kappa2;
    Eigen::MatrixXd theta;
    Eigen::MatrixXd theta_tilde;
    Eigen::MatrixXd theta_dirichlet;
    Eigen::MatrixXd dirichlet_form;
    double nu_mean = 0.0;
    KernelMoments moments;
    CellDiagnostics diagnostics;

    Eigen::MatrixXd theta_sym() const { return 0.5 * (theta + theta.transpose()); }
};

/// Full cell pipeline: fold, assemble, kappa_1, Theta (two routes), kappa_2.
CellSolution solve_cell_problem(const CellProblem& problem);

}  // namespace nlh
