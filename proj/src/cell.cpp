#include "nlh/cell.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/LU>
#include <Eigen/SVD>

#include "nlh/errors.hpp"
#include "nlh/spectral.hpp"

namespace nlh {

std::string_view to_string(CellBackend backend) {
    return backend == CellBackend::direct ? "direct" : "deflated_neumann";
}

CellBackend parse_backend(std::string_view name) {
    if (name == "direct") return CellBackend::direct;
    if (name == "deflated_neumann" || name == "deflated") return CellBackend::deflated_neumann;
    throw ConfigError("unknown cell backend '" + std::string(name) + "'");
}

CellOperator::CellOperator(TorusGrid grid, Eigen::MatrixXd integral_part, Eigen::VectorXd mu)
    : grid_(grid), k_(std::move(integral_part)), mu_(std::move(mu)) {
    g_ = k_.rowwise().sum();
}

Eigen::MatrixXd CellOperator::matrix() const {
    Eigen::MatrixXd a = k_;
    a.diagonal() -= g_;
    return a;
}

Eigen::MatrixXd CellOperator::apply(const Eigen::MatrixXd& phi) const {
    return k_ * phi - g_.asDiagonal() * phi;
}

CellOperator assemble_cell_operator(const FoldedKernel& folded, const PeriodicField& mu,
                                    std::size_t memory_cap) {
    require_same_grid(folded.grid, mu.grid, "assemble_cell_operator");
    const TorusGrid& grid = mu.grid;
    const std::size_t n = grid.size();
    const double bytes = static_cast<double>(n) * static_cast<double>(n) * sizeof(double);
    if (bytes > static_cast<double>(memory_cap)) {
        std::ostringstream msg;
        msg << "dense cell operator needs " << bytes / (1 << 20) << " MiB for " << n
            << " nodes; cap is " << memory_cap / (1 << 20) << " MiB";
        throw ResolutionError(msg.str());
    }
    const double w = grid.weight();
    Eigen::MatrixXd k(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < n; ++j) {
        const double mw = mu.values(static_cast<Eigen::Index>(j), 0) * w;
        for (std::size_t i = 0; i < n; ++i)
            k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                folded.ahat.values(static_cast<Eigen::Index>(grid.difference_index(i, j)), 0) * mw;
    }
    return CellOperator(grid, std::move(k), mu.values.col(0));
}

PeriodicField first_order_rhs(const PeriodicField& bhat, const PeriodicField& mu) {
    require_same_grid(bhat.grid, mu.grid, "first_order_rhs");
    PeriodicField f(mu.grid, bhat.components(), FieldRole::other);
    for (int c = 0; c < bhat.components(); ++c)
        f.values.col(c) = circular_convolve(mu.grid, bhat.values.col(c), mu.values.col(0));
    return f;
}

Eigen::VectorXd check_solvability(const PeriodicField& rhs, const PeriodicField& mu) {
    require_same_grid(rhs.grid, mu.grid, "check_solvability");
    return ((rhs.values.transpose() * mu.values.col(0)) * rhs.grid.weight()).cwiseAbs();
}

// ---------------------------------------------------------------------------
// Deflated Neumann iteration

DeflatedIteration::DeflatedIteration(const CellOperator& op) {
    q_ = op.multiplier();
    if (!(q_.minCoeff() > 0.0)) throw SolverBreakdownError("deflated iteration: mass function q must be positive");
    p_ = q_.cwiseInverse().asDiagonal() * op.integral_part();
    w_ = op.mu().cwiseProduct(q_);
}

Eigen::VectorXd DeflatedIteration::project(const Eigen::VectorXd& psi) const {
    return psi.array() - w_.dot(psi) / w_.sum();
}

double DeflatedIteration::h1_defect(const Eigen::VectorXd& psi) const {
    const double denom = w_.norm() * psi.norm();
    return denom == 0.0 ? 0.0 : std::abs(w_.dot(psi)) / denom;
}

double DeflatedIteration::estimate_contraction(int iterations) const {
    std::mt19937_64 rng(0x5eed);
    std::normal_distribution<double> normal;
    Eigen::VectorXd v(p_.rows());
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = normal(rng);
    v = project(v);
    v.normalize();
    const int window = std::min(20, iterations / 2);
    double log_growth = 0.0;
    for (int it = 0; it < iterations; ++it) {
        Eigen::VectorXd next = project(p_ * v);
        const double growth = next.norm();
        if (growth == 0.0) return 0.0;
        if (it >= iterations - window) log_growth += std::log(growth);
        v = next / growth;
    }
    return std::exp(log_growth / window);
}

Eigen::VectorXd DeflatedIteration::solve(const Eigen::VectorXd& f, double rel_tol, int max_iterations,
                                         int* iterations) const {
    const Eigen::VectorXd fq = f.cwiseQuotient(q_);
    const Eigen::VectorXd g = project(fq);
    *iterations = 0;
    // Scaled by the unprojected norm: when f lies along mu (roundoff rhs of
    // constant coefficients) g is pure cancellation noise.
    const double gnorm = fq.norm();
    if (g.norm() == 0.0) return Eigen::VectorXd::Zero(f.size());
    Eigen::VectorXd x = -g;
    for (int it = 1; it <= max_iterations; ++it) {
        Eigen::VectorXd px = p_ * x;
        const double residual = (px - x - g).norm();
        *iterations = it;
        if (residual <= rel_tol * gnorm) return x;
        x = project(px - g);
    }
    const double rho = estimate_contraction();
    std::ostringstream msg;
    msg << "deflated Neumann iteration did not reach relative residual " << rel_tol << " in "
        << max_iterations << " iterations (estimated spectral radius on H1: " << rho << ")";
    throw NonContractionError(msg.str(), rho);
}

// ---------------------------------------------------------------------------
// Cell solves

namespace {

// Normwise backward error ||A x - P b|| / (||A|| ||x|| + ||b||) with ||A||_inf <= 2 max G.
// P b removes the component along mu, which no x can match and which the
// solvability check already accounts for. Unlike ||r|| / ||b|| this stays
// meaningful when b is itself roundoff, as for constant coefficients.
double backward_error(const CellOperator& op, const Eigen::VectorXd& ax, const Eigen::VectorXd& x,
                      const Eigen::VectorXd& b) {
    const Eigen::VectorXd& mu = op.mu();
    const Eigen::VectorXd pb = b - (mu.dot(b) / mu.squaredNorm()) * mu;
    const double denom = 2.0 * op.multiplier().maxCoeff() * x.norm() + b.norm();
    return denom > 0.0 ? (ax - pb).norm() / denom : 0.0;
}

}  // namespace

CorrectorResult solve_cell_system(const CellOperator& op, const PeriodicField& rhs, CellBackend backend,
                                  const SolverOptions& options, FieldRole role) {
    require_same_grid(op.grid(), rhs.grid, "solve_cell_system");
    if (!(op.mu().minCoeff() > 0.0))
        throw SolverBreakdownError("cell solve: mu must be strictly positive (kernel of A* is not spanned by mu)");
    const auto n = static_cast<Eigen::Index>(op.grid().size());
    const int comps = rhs.components();

    SolveReport report;
    report.backend = backend;
    report.residual = Eigen::VectorXd::Zero(comps);
    PeriodicField mu_field(op.grid(), Eigen::MatrixXd(op.mu()), FieldRole::mu);
    report.solvability = check_solvability(rhs, mu_field);

    Eigen::MatrixXd x(n, comps);
    if (backend == CellBackend::direct) {
        // Bordered system [A u; v^T 0] with u ~ mu (left null vector) and v ~ 1.
        const double scale = op.multiplier().mean();
        Eigen::MatrixXd b(n + 1, n + 1);
        b.topLeftCorner(n, n) = op.matrix();
        b.topRightCorner(n, 1) = op.mu() * (scale / op.mu().maxCoeff());
        b.bottomLeftCorner(1, n).setConstant(scale / static_cast<double>(n));
        b(n, n) = 0.0;
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(b);
        Eigen::MatrixXd r = Eigen::MatrixXd::Zero(n + 1, comps);
        r.topRows(n) = rhs.values;
        Eigen::MatrixXd sol = lu.solve(r);
        if (!sol.allFinite()) throw SolverBreakdownError("cell solve: bordered system is singular");
        x = sol.topRows(n);
    } else {
        const DeflatedIteration iter(op);
        report.contraction = iter.estimate_contraction();
        for (int c = 0; c < comps; ++c) {
            int its = 0;
            x.col(c) = iter.solve(rhs.values.col(c), options.residual_rel_tol, options.max_iterations, &its);
            report.iterations = std::max(report.iterations, its);
        }
    }

    for (int c = 0; c < comps; ++c) x.col(c).array() -= x.col(c).mean();

    const Eigen::MatrixXd ax = op.apply(x);
    for (int c = 0; c < comps; ++c) {
        report.residual[c] =
            backward_error(op, ax.col(c), x.col(c), rhs.values.col(c));
        if (!(report.residual[c] < 1e3 * options.residual_rel_tol) ||
            !std::isfinite(report.residual[c])) {
            std::ostringstream msg;
            msg << "cell solve (" << to_string(backend) << "): backward error " << report.residual[c]
                << " in component " << c << " (solvability defect " << report.solvability[c] << ")";
            throw SolverBreakdownError(msg.str());
        }
    }

    if (op.grid().size() <= options.singular_value_limit) {
        Eigen::BDCSVD<Eigen::MatrixXd> svd(op.matrix());
        const auto& s = svd.singularValues();
        report.smallest_singular_values = {s[s.size() - 1], s[s.size() - 2]};
    }

    return CorrectorResult{PeriodicField(op.grid(), std::move(x), role), std::move(report)};
}

CorrectorResult solve_corrector1(const CellOperator& op, const PeriodicField& f, CellBackend backend,
                                 const SolverOptions& options) {
    return solve_cell_system(op, f, backend, options, FieldRole::corrector1);
}

CorrectorResult solve_corrector2(const CellOperator& op, const PeriodicField& rhs, CellBackend backend,
                                 const SolverOptions& options) {
    return solve_cell_system(op, rhs, backend, options, FieldRole::corrector2);
}

// ---------------------------------------------------------------------------
// Effective matrix

ThetaResult compute_theta(const PeriodicField& kappa1, const FoldedKernel& folded,
                          const PeriodicField& lambda, const PeriodicField& mu) {
    require_same_grid(kappa1.grid, mu.grid, "compute_theta");
    require_same_grid(lambda.grid, mu.grid, "compute_theta");
    require_same_grid(folded.grid, mu.grid, "compute_theta");
    const TorusGrid& grid = mu.grid;
    const int d = grid.dim();
    const double w = grid.weight();
    const Eigen::VectorXd m = mu.values.col(0);

    ThetaResult out;
    out.theta_tilde = Eigen::MatrixXd::Zero(d, d);
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            const Eigen::VectorXd c_mu = circular_convolve(grid, folded.chat.values.col(i * d + j), m);
            const Eigen::VectorXd b_mk =
                circular_convolve(grid, folded.bhat.values.col(i), m.cwiseProduct(kappa1.values.col(j)));
            out.theta_tilde(i, j) = w * m.dot(0.5 * c_mu - b_mk);
        }
    }
    out.nu_mean = weight_field(lambda, mu).mean();
    out.theta = out.theta_tilde / out.nu_mean;
    return out;
}

DirichletForm theta_dirichlet_form(const PeriodicField& kappa1, const FoldedKernel& folded,
                                   const PeriodicField& lambda, const PeriodicField& mu) {
    require_same_grid(kappa1.grid, mu.grid, "theta_dirichlet_form");
    require_same_grid(lambda.grid, mu.grid, "theta_dirichlet_form");
    require_same_grid(folded.grid, mu.grid, "theta_dirichlet_form");
    const TorusGrid& grid = mu.grid;
    const int d = grid.dim();
    const std::size_t n = grid.size();

    Eigen::MatrixXd form = Eigen::MatrixXd::Zero(d, d);
    double dk[kMaxDim];
    for (std::size_t a = 0; a < n; ++a) {
        const auto ia = static_cast<Eigen::Index>(a);
        Eigen::MatrixXd row = Eigen::MatrixXd::Zero(d, d);
        for (std::size_t b = 0; b < n; ++b) {
            const auto ib = static_cast<Eigen::Index>(b);
            const auto iw = static_cast<Eigen::Index>(grid.difference_index(a, b));
            const double mm = mu.values(ib, 0);
            for (int c = 0; c < d; ++c) dk[c] = kappa1.values(ia, c) - kappa1.values(ib, c);
            const double ah = folded.ahat.values(iw, 0);
            for (int i = 0; i < d; ++i) {
                const double bi = folded.bhat.values(iw, i);
                for (int j = 0; j < d; ++j) {
                    row(i, j) += mm * (folded.chat.values(iw, i * d + j) + bi * dk[j] +
                                       folded.bhat.values(iw, j) * dk[i] + ah * dk[i] * dk[j]);
                }
            }
        }
        form += mu.values(ia, 0) * row;
    }
    form *= grid.weight() * grid.weight();

    DirichletForm out;
    out.form = form;
    out.theta_sym = form / (2.0 * weight_field(lambda, mu).mean());
    return out;
}

SecondOrderRhs second_order_rhs(const Eigen::MatrixXd& theta, const PeriodicField& kappa1,
                                const PeriodicField& lambda, const PeriodicField& mu,
                                const FoldedKernel& folded, double rel_tol) {
    require_same_grid(kappa1.grid, mu.grid, "second_order_rhs");
    require_same_grid(lambda.grid, mu.grid, "second_order_rhs");
    require_same_grid(folded.grid, mu.grid, "second_order_rhs");
    const TorusGrid& grid = mu.grid;
    const int d = grid.dim();
    const Eigen::VectorXd m = mu.values.col(0);
    const Eigen::VectorXd inv_lambda = lambda.values.col(0).cwiseInverse();

    PeriodicField raw(grid, d * d, FieldRole::other);
    Eigen::MatrixXd solv(d, d);
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            const Eigen::VectorXd t1 = theta(i, j) * inv_lambda;
            const Eigen::VectorXd t2 = 0.5 * circular_convolve(grid, folded.chat.values.col(i * d + j), m);
            const Eigen::VectorXd t3 =
                circular_convolve(grid, folded.bhat.values.col(i), m.cwiseProduct(kappa1.values.col(j)));
            raw.values.col(i * d + j) = t1 - t2 + t3;
            solv(i, j) = std::abs(grid.weight() * m.dot(raw.values.col(i * d + j)));
            const double scale = grid.weight() * m.cwiseAbs().dot(t1.cwiseAbs() + t2.cwiseAbs() + t3.cwiseAbs());
            if (solv(i, j) > rel_tol * scale) {
                std::ostringstream msg;
                msg << "second-order cell rhs (" << i << "," << j << ") is not orthogonal to mu: "
                    << solv(i, j) << " vs scale " << scale << "; Theta inconsistent with kappa_1";
                throw InconsistentThetaError(msg.str());
            }
        }
    }
    PeriodicField sym(grid, d * d, FieldRole::other);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            sym.values.col(i * d + j) = 0.5 * (raw.values.col(i * d + j) + raw.values.col(j * d + i));
    return SecondOrderRhs{std::move(raw), std::move(sym), std::move(solv)};
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {


Eigen::MatrixXd theta_at_resolution(const CellProblem& problem, int n) {
    const TorusGrid grid(problem.kernel.dim(), n);
    const FoldedKernel folded = fold_kernel(problem.kernel, grid, problem.tail_tol);
    const PeriodicField lambda = problem.lambda.sample(grid, FieldRole::lambda);
    const PeriodicField mu = problem.mu.sample(grid, FieldRole::mu);
    const CellOperator op = assemble_cell_operator(folded, mu, problem.memory_cap);
    SolverOptions opts = problem.solver;
    opts.singular_value_limit = 0;
    const auto k1 = solve_corrector1(op, first_order_rhs(folded.bhat, mu), CellBackend::direct, opts);
    return compute_theta(k1.field, folded, lambda, mu).theta;
}

}  // namespace

CellSolution solve_cell_problem(const CellProblem& problem) {
    const int d = problem.kernel.dim();
    if (problem.lambda.dim() != d || problem.mu.dim() != d)
        throw ConfigError("kernel and coefficient dimensions differ");
    const TorusGrid grid(d, problem.n);

    const KernelMoments moments = kernel_moments(problem.kernel);
    const FoldedKernel folded = fold_kernel(problem.kernel, grid, problem.tail_tol);
    PeriodicField lambda = problem.lambda.sample(grid, FieldRole::lambda);
    PeriodicField mu = problem.mu.sample(grid, FieldRole::mu);

    CellDiagnostics diag;
    diag.bounds = validate_coefficients(lambda, mu);
    diag.k_max = folded.k_max;
    diag.fold_tail_bound = folded.tail_bound;

    const CellOperator op = assemble_cell_operator(folded, mu, problem.memory_cap);
    const PeriodicField f = first_order_rhs(folded.bhat, mu);
    diag.solvability1 = check_solvability(f, mu);
    // A priori bound |<f_c, mu>| <= h^d sum|mu| * h^d sum|bhat_c| * max mu; f itself
    // may be pure roundoff.
    const double mu_l1 = grid.weight() * mu.values.col(0).cwiseAbs().sum();
    for (int c = 0; c < d; ++c)
        if (diag.solvability1[c] > problem.solver.solvability_rel_tol * mu_l1 *
                                       grid.weight() * folded.bhat.values.col(c).cwiseAbs().sum() *
                                       mu.values.col(0).maxCoeff())
            throw InconsistentThetaError("first-order rhs violates the solvability condition");

    CorrectorResult k1 = solve_corrector1(op, f, problem.backend, problem.solver);
    diag.solve1 = k1.report;

    const ThetaResult th = compute_theta(k1.field, folded, lambda, mu);
    const DirichletForm df = theta_dirichlet_form(k1.field, folded, lambda, mu);
    const SecondOrderRhs rhs2 = second_order_rhs(th.theta, k1.field, lambda, mu, folded,
                                                 problem.solver.solvability_rel_tol);
    diag.solvability2 = rhs2.solvability;
    CorrectorResult k2 = solve_corrector2(op, rhs2.symmetric, problem.backend, problem.solver);
    diag.solve2 = k2.report;

    const Eigen::MatrixXd sym = 0.5 * (th.theta + th.theta.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
    diag.pd_margin = eig.eigenvalues().minCoeff();
    diag.pd_margin_relative = diag.pd_margin / sym.norm();
    diag.dirichlet_rel_diff = (sym - df.theta_sym).norm() / th.theta.norm();

    std::ostringstream warn;
    if (!(diag.pd_margin > 0.0)) warn << "symmetric part of Theta is not positive definite; ";
    if (problem.refinement_check && problem.n % 2 == 0 && problem.n / 2 >= 4) {
        const Eigen::MatrixXd coarse = theta_at_resolution(problem, problem.n / 2);
        diag.refinement_rel_change = (coarse - th.theta).norm() / th.theta.norm();
        if (*diag.refinement_rel_change > problem.refinement_rel_tol)
            warn << "Theta changes by " << *diag.refinement_rel_change << " (relative) between n="
                 << problem.n / 2 << " and n=" << problem.n << "; grid likely under-resolved; ";
    }
    diag.warning = warn.str();
    diag.pd_margin_warning = !diag.warning.empty();

    CellSolution sol{grid,
                     std::move(lambda),
                     std::move(mu),
                     std::move(k1.field),
                     std::move(k2.field),
                     th.theta,
                     th.theta_tilde,
                     df.theta_sym,
                     df.form,
                     th.nu_mean,
                     moments,
                     std::move(diag)};
    return sol;
}

}  // namespace nlh
