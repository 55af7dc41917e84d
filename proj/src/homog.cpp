#include "nlh/homog.hpp"

#include <chrono>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <limits>
#include <span>
#include <sstream>

#include <Eigen/LU>
#include <unsupported/Eigen/MatrixFunctions>

#include "nlh/errors.hpp"
#include "nlh/parallel.hpp"
#include "nlh/spectral.hpp"

namespace nlh {

// ---------------------------------------------------------------------------
// Sample grid

std::size_t SampleGrid::size() const {
    std::size_t s = 1;
    for (int c = 0; c < dim; ++c) s *= static_cast<std::size_t>(points);
    return s;
}

MultiIndex SampleGrid::multi_index(std::size_t flat) const {
    MultiIndex idx{};
    for (int c = 0; c < dim; ++c) {
        idx[c] = static_cast<int>(flat % static_cast<std::size_t>(points));
        flat /= static_cast<std::size_t>(points);
    }
    return idx;
}

Point SampleGrid::node(std::size_t flat) const {
    const MultiIndex idx = multi_index(flat);
    Point x{};
    for (int c = 0; c < dim; ++c) x[c] = -half_width + idx[c] * spacing();
    return x;
}

double SampleGrid::cell_volume() const { return std::pow(spacing(), dim); }

SampleGrid make_sample_grid(int dim, double half_width, int points) {
    if (dim < 1 || dim > kMaxDim) throw ConfigError("sample grid: dimension must be 1..3");
    if (!(half_width > 0.0)) throw ConfigError("sample grid: half width must be positive");
    if (points < 4) throw ConfigError("sample grid: need at least 4 points per axis");
    return SampleGrid{dim, half_width, points};
}

SampleGrid sample_grid_for(int dim, double half_width, double eps, int nodes_per_cell) {
    if (!(eps > 0.0)) throw ConfigError("sample grid: eps must be positive");
    if (nodes_per_cell < 1) throw ConfigError("sample grid: nodes_per_cell must be positive");
    const double exact = 2.0 * half_width * nodes_per_cell / eps;
    const int points = static_cast<int>(std::ceil(exact - 1e-9 * exact));
    return make_sample_grid(dim, half_width, points);
}

double GaussianSource::operator()(const Point& x, int dim) const {
    double r2 = 0.0;
    for (int c = 0; c < dim; ++c) r2 += x[c] * x[c];
    return amplitude * std::exp(-0.5 * r2 / (width * width));
}

Eigen::VectorXd GaussianSource::sample(const SampleGrid& grid) const {
    Eigen::VectorXd f(static_cast<Eigen::Index>(grid.size()));
    for (std::size_t i = 0; i < grid.size(); ++i) f[static_cast<Eigen::Index>(i)] = (*this)(grid.node(i), grid.dim);
    return f;
}

double discrete_l2(const SampleGrid& grid, const Eigen::VectorXd& u) {
    return std::sqrt(grid.cell_volume()) * u.norm();
}

// ---------------------------------------------------------------------------
// Operator

DiscreteNonlocalOperator::DiscreteNonlocalOperator(SampleGrid grid, double eps, Eigen::MatrixXd matrix,
                                                   Eigen::VectorXd nu)
    : grid_(grid), eps_(eps), l_(std::move(matrix)), nu_(std::move(nu)) {}

Eigen::VectorXd DiscreteNonlocalOperator::apply(const Eigen::VectorXd& u) const {
    const Eigen::Index n = l_.rows();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const double uj = u[j];
        const double* col = l_.col(j).data();
        for (Eigen::Index i = 0; i < n; ++i)
            if (i != j) out[i] += col[i] * (uj - u[i]);
    }
    return out;
}

double DiscreteNonlocalOperator::weighted_dot(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const {
    return grid_.cell_volume() * nu_.cwiseProduct(u).dot(v);
}

double DiscreteNonlocalOperator::weighted_norm(const Eigen::VectorXd& u) const {
    return std::sqrt(weighted_dot(u, u));
}

DiscreteNonlocalOperator assemble_Leps(const SampleGrid& grid, double eps, const Kernel& kernel,
                                       const CoefficientSpec& lambda, const CoefficientSpec& mu,
                                       double tail_mass, int min_nodes_per_cell) {
    const int d = grid.dim;
    if (kernel.dim() != d || lambda.dim() != d || mu.dim() != d)
        throw ConfigError("assemble_Leps: kernel, coefficients and grid must share the dimension");
    if (!(eps > 0.0)) throw ConfigError("assemble_Leps: eps must be positive");
    const double delta = grid.spacing();
    if (delta > eps / min_nodes_per_cell * (1.0 + 1e-12)) {
        std::ostringstream msg;
        msg << "grid spacing " << delta << " exceeds eps/" << min_nodes_per_cell << " = "
            << eps / min_nodes_per_cell;
        throw ResolutionError(msg.str());
    }
    const double reach = eps * kernel.effective_radius(tail_mass);
    if (reach > grid.half_width) {
        std::ostringstream msg;
        msg << "kernel range " << reach << " at eps=" << eps << " (tail mass " << tail_mass
            << ") exceeds the box half width " << grid.half_width;
        throw TruncationError(msg.str(), reach);
    }

    const std::size_t n = grid.size();
    const int m = grid.points;
    const int span = 2 * m - 1;
    std::size_t table_size = 1;
    for (int c = 0; c < d; ++c) table_size *= static_cast<std::size_t>(span);
    std::vector<double> table(table_size);
    for (std::size_t t = 0; t < table_size; ++t) {
        std::size_t rest = t;
        double z[kMaxDim];
        for (int c = 0; c < d; ++c) {
            z[c] = (static_cast<int>(rest % static_cast<std::size_t>(span)) - (m - 1)) * delta / eps;
            rest /= static_cast<std::size_t>(span);
        }
        table[t] = kernel(std::span<const double>(z, static_cast<std::size_t>(d)));
    }

    std::vector<MultiIndex> idx(n);
    Eigen::VectorXd lam(static_cast<Eigen::Index>(n)), muv(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        idx[i] = grid.multi_index(i);
        Point y = grid.node(i);
        for (int c = 0; c < d; ++c) y[c] /= eps;
        lam[static_cast<Eigen::Index>(i)] = lambda(y);
        muv[static_cast<Eigen::Index>(i)] = mu(y);
    }
    if (!(lam.minCoeff() > 0.0) || !(muv.minCoeff() > 0.0))
        throw CoefficientBoundsError("assemble_Leps: coefficients must be positive at every node");

    const double scale = std::pow(eps, -d - 2) * grid.cell_volume();
    Eigen::MatrixXd l(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < n; ++j) {
        const double mj = scale * muv[static_cast<Eigen::Index>(j)];
        double* col = l.col(static_cast<Eigen::Index>(j)).data();
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t t = 0, stride = 1;
            for (int c = 0; c < d; ++c) {
                t += static_cast<std::size_t>(idx[i][c] - idx[j][c] + m - 1) * stride;
                stride *= static_cast<std::size_t>(span);
            }
            col[i] = table[t] * lam[static_cast<Eigen::Index>(i)] * mj;
        }
    }
    for (Eigen::Index i = 0; i < l.rows(); ++i) {
        double s = 0.0;
        for (Eigen::Index j = 0; j < l.cols(); ++j)
            if (j != i) s += l(i, j);
        l(i, i) = -s;
    }
    return DiscreteNonlocalOperator(grid, eps, std::move(l), muv.cwiseQuotient(lam));
}

StructureReport check_structure(const DiscreteNonlocalOperator& op, int samples, std::uint64_t seed) {
    const Eigen::MatrixXd& l = op.matrix();
    const Eigen::VectorXd& nu = op.nu();
    const Eigen::Index n = l.rows();
    StructureReport rep;

    Eigen::VectorXd rows = Eigen::VectorXd::Zero(n);
    for (Eigen::Index j = 0; j < n; ++j) rows += l.col(j);
    const double diag = l.diagonal().cwiseAbs().maxCoeff();
    rep.row_sum_defect = rows.cwiseAbs().maxCoeff() / diag;
    rep.constant_defect = op.apply(Eigen::VectorXd::Ones(n)).cwiseAbs().maxCoeff();

    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = j + 1; i < n; ++i)
            rep.asymmetry = std::max(rep.asymmetry, std::abs(nu[i] * l(i, j) - nu[j] * l(j, i)));
    rep.asymmetry_relative = rep.asymmetry / nu.cwiseProduct(l.diagonal()).cwiseAbs().maxCoeff();

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    rep.samples = samples;
    rep.max_quadratic = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd u(n);
    for (int s = 0; s < samples; ++s) {
        for (Eigen::Index i = 0; i < n; ++i) u[i] = normal(rng);
        const double q = op.weighted_dot(l * u, u) / op.weighted_dot(u, u);
        rep.max_quadratic = std::max(rep.max_quadratic, q);
    }
    rep.negative = samples == 0 || rep.max_quadratic <= 0.0;
    return rep;
}

// ---------------------------------------------------------------------------
// Solvers

ResolventSolution solve_resolvent_eps(const DiscreteNonlocalOperator& op, double m, const Eigen::VectorXd& f) {
    if (!(m > 0.0)) throw ConfigError("resolvent: shift m must be positive");
    ResolventSolution out;
    const Eigen::Index n = op.matrix().rows();
    out.weighted_norm_f = op.weighted_norm(f);
    if (f.cwiseAbs().maxCoeff() == 0.0) {
        out.u = Eigen::VectorXd::Zero(n);
        return out;
    }
    Eigen::MatrixXd a = op.matrix();
    a.diagonal().array() -= m;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
    out.u = lu.solve(f);
    out.residual = (a * out.u - f).norm() / f.norm();
    if (!(out.residual < 1e-10)) {
        std::ostringstream msg;
        msg << "resolvent solve residual " << out.residual << " exceeds 1e-10";
        throw SolverBreakdownError(msg.str());
    }
    out.weighted_norm_u = op.weighted_norm(out.u);
    return out;
}

namespace {

// Per-mode wavenumbers of the box grid; `odd` zeroes the Nyquist mode.
std::vector<Eigen::VectorXd> mode_wavenumbers(const SampleGrid& grid, bool odd) {
    const std::size_t n = grid.size();
    const std::vector<double> k1 = FourierTransform::wavenumbers(grid.points, grid.spacing());
    std::vector<Eigen::VectorXd> out(static_cast<std::size_t>(grid.dim), Eigen::VectorXd(static_cast<Eigen::Index>(n)));
    const double nyquist = std::numbers::pi / grid.spacing();
    for (std::size_t i = 0; i < n; ++i) {
        const MultiIndex idx = grid.multi_index(i);
        for (int c = 0; c < grid.dim; ++c) {
            double k = k1[static_cast<std::size_t>(idx[c])];
            if (!odd && 2 * idx[c] == grid.points) k = nyquist;
            out[static_cast<std::size_t>(c)][static_cast<Eigen::Index>(i)] = k;
        }
    }
    return out;
}

// Fourier symbol of Theta:grad grad; diagonal terms use the full Nyquist
// wavenumber, mixed terms the odd (first-derivative) convention.
Eigen::VectorXd theta_symbol(const Eigen::MatrixXd& theta, const SampleGrid& grid) {
    const int d = grid.dim;
    const auto odd = mode_wavenumbers(grid, true);
    const auto even = mode_wavenumbers(grid, false);
    Eigen::VectorXd s = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.size()));
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            if (i == j)
                s -= theta(i, i) * even[static_cast<std::size_t>(i)].cwiseAbs2();
            else
                s -= theta(i, j) * odd[static_cast<std::size_t>(i)].cwiseProduct(odd[static_cast<std::size_t>(j)]);
        }
    return s;
}

}  // namespace

void spectral_derivatives(const SampleGrid& grid, const Eigen::VectorXd& u, Eigen::MatrixXd& gradient,
                          Eigen::MatrixXd& hessian) {
    const int d = grid.dim;
    const auto n = static_cast<Eigen::Index>(grid.size());
    const FourierTransform ft(d, grid.points);
    const Eigen::VectorXcd uh = ft.forward(u);
    const auto odd = mode_wavenumbers(grid, true);
    const auto even = mode_wavenumbers(grid, false);
    const std::complex<double> iu(0.0, 1.0);
    gradient.resize(n, d);
    hessian.resize(n, d * d);
    for (int i = 0; i < d; ++i) {
        const Eigen::VectorXcd ki = odd[static_cast<std::size_t>(i)].cast<std::complex<double>>();
        gradient.col(i) = ft.inverse_real(iu * ki.cwiseProduct(uh));
        for (int j = 0; j < d; ++j) {
            Eigen::VectorXd sym;
            if (i == j)
                sym = -even[static_cast<std::size_t>(i)].cwiseAbs2();
            else
                sym = -odd[static_cast<std::size_t>(i)].cwiseProduct(odd[static_cast<std::size_t>(j)]);
            hessian.col(i * d + j) = ft.inverse_real(sym.cast<std::complex<double>>().cwiseProduct(uh));
        }
    }
}

LimitSolution solve_limit_resolvent(const Eigen::MatrixXd& theta, double m, const Eigen::VectorXd& f,
                                    const SampleGrid& grid) {
    if (!(m > 0.0)) throw ConfigError("limit resolvent: shift m must be positive");
    const int d = grid.dim;
    if (theta.rows() != d || theta.cols() != d) throw ConfigError("limit resolvent: Theta dimension mismatch");
    const FourierTransform ft(d, grid.points);
    const Eigen::VectorXd symbol = theta_symbol(theta, grid).array() - m;
    const Eigen::VectorXcd fh = ft.forward(f);
    LimitSolution out;
    out.u = ft.inverse_real(fh.cwiseQuotient(symbol.cast<std::complex<double>>()));
    spectral_derivatives(grid, out.u, out.gradient, out.hessian);
    Eigen::VectorXd lhs = -m * out.u;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) lhs += theta(i, j) * out.hessian.col(i * d + j);
    const double fn = f.norm();
    out.residual = fn == 0.0 ? 0.0 : (lhs - f).norm() / fn;
    return out;
}

Eigen::VectorXd limit_semigroup(const Eigen::MatrixXd& theta, const Eigen::VectorXd& f, const SampleGrid& grid,
                                double t) {
    if (t == 0.0) return f;
    const FourierTransform ft(grid.dim, grid.points);
    const Eigen::VectorXd decay = (t * theta_symbol(theta, grid)).array().exp();
    return ft.inverse_real(ft.forward(f).cwiseProduct(decay.cast<std::complex<double>>()));
}

Eigen::VectorXd corrector_expansion(const LimitSolution& u0, const PeriodicField& kappa1,
                                    const PeriodicField& kappa2, double eps, const SampleGrid& grid) {
    const int d = grid.dim;
    if (kappa1.grid.dim() != d || kappa1.components() != d || kappa2.components() != d * d)
        throw GridMismatchError("corrector_expansion: corrector fields do not match the grid dimension");
    Eigen::VectorXd v = u0.u;
    for (std::size_t n = 0; n < grid.size(); ++n) {
        const auto row = static_cast<Eigen::Index>(n);
        Point y = grid.node(n);
        for (int c = 0; c < d; ++c) y[c] /= eps;
        double first = 0.0, second = 0.0;
        for (int i = 0; i < d; ++i) {
            first += interpolate_periodic(kappa1, i, y) * u0.gradient(row, i);
            for (int j = 0; j < d; ++j)
                second += interpolate_periodic(kappa2, i * d + j, y) * u0.hessian(row, i * d + j);
        }
        v[row] += eps * first + eps * eps * second;
    }
    return v;
}

double main_lemma_residual(const DiscreteNonlocalOperator& op, const Eigen::VectorXd& v,
                           const Eigen::MatrixXd& theta, const LimitSolution& u0) {
    const int d = op.grid().dim;
    Eigen::VectorXd phi = op.apply(v);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) phi -= theta(i, j) * u0.hessian.col(i * d + j);
    return discrete_l2(op.grid(), phi);
}

// ---------------------------------------------------------------------------
// Studies

void require_decreasing(const std::vector<double>& eps) {
    if (eps.empty()) throw ConfigError("eps list must not be empty");
    for (std::size_t i = 0; i < eps.size(); ++i) {
        if (!(eps[i] > 0.0)) throw ConfigError("eps values must be positive");
        if (i > 0 && !(eps[i] < eps[i - 1])) throw ConfigError("eps list must be strictly decreasing");
    }
}

namespace {

bool all_below(const std::vector<double>& v, double floor) {
    for (double x : v)
        if (x > floor) return false;
    return true;
}

StudyVerdict decreasing_verdict(const std::string& name, const std::vector<double>& v, double floor,
                                double step_ratio_max) {
    StudyVerdict out{name, true, ""};
    std::ostringstream detail;
    if (all_below(v, floor)) {
        detail << "all values below " << floor;
        out.detail = detail.str();
        return out;
    }
    for (std::size_t i = 1; i < v.size(); ++i) {
        const double ratio = v[i] / v[i - 1];
        detail << (i > 1 ? ", " : "ratios ") << ratio;
        if (!(ratio < step_ratio_max)) out.pass = false;
    }
    if (v.size() < 2) detail << "single point";
    detail << " (required < " << step_ratio_max << ")";
    out.detail = detail.str();
    return out;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

bool ResolventStudy::pass() const { return all_pass(verdicts); }

bool SemigroupStudy::pass() const { return all_pass(verdicts); }

ResolventStudy resolvent_convergence_study(const HomogProblem& problem, const CellSolution& cell,
                                           const std::vector<double>& eps, const StudyOptions& options) {
    require_decreasing(eps);
    const int d = problem.kernel.dim();
    if (cell.theta.rows() != d) throw ConfigError("resolvent study: cell solution has the wrong dimension");
    ResolventStudy study;
    study.shift = problem.shift;
    study.points.resize(eps.size());

    parallel_for(eps.size(), options.threads, [&](std::size_t k) {
        const auto start = std::chrono::steady_clock::now();
        const SampleGrid grid = sample_grid_for(d, problem.half_width, eps[k], problem.nodes_per_cell);
        const DiscreteNonlocalOperator op =
            assemble_Leps(grid, eps[k], problem.kernel, problem.lambda, problem.mu, problem.tail_mass,
                          problem.nodes_per_cell);
        const Eigen::VectorXd f = problem.source.sample(grid);
        const ResolventSolution ue = solve_resolvent_eps(op, problem.shift, f);
        const LimitSolution u0 = solve_limit_resolvent(cell.theta, problem.shift, f, grid);
        const Eigen::VectorXd v = corrector_expansion(u0, cell.kappa1, cell.kappa2, eps[k], grid);

        ResolventPoint& p = study.points[k];
        p.eps = eps[k];
        p.points = grid.points;
        p.spacing = grid.spacing();
        p.error_l2 = discrete_l2(grid, ue.u - u0.u);
        p.error_sup = (ue.u - u0.u).cwiseAbs().maxCoeff();
        p.phi_norm = main_lemma_residual(op, v, cell.theta, u0);
        p.corrector_gap = discrete_l2(grid, v - u0.u);
        p.solver_residual = ue.residual;
        p.limit_residual = u0.residual;
        p.weighted_norm_u = ue.weighted_norm_u;
        p.weighted_norm_f = ue.weighted_norm_f;
        p.runtime_s = seconds_since(start);
    });

    std::vector<double> err, phi;
    for (const auto& p : study.points) {
        err.push_back(p.error_l2);
        phi.push_back(p.phi_norm);
    }
    study.verdicts.push_back(decreasing_verdict("error_decreasing", err, options.zero_floor, options.step_ratio_max));
    {
        StudyVerdict v{"error_final_ratio", true, ""};
        std::ostringstream detail;
        if (all_below(err, options.zero_floor)) {
            detail << "all errors below " << options.zero_floor;
        } else {
            const double ratio = err.back() / err.front();
            v.pass = ratio < options.final_ratio_max;
            detail << "final/initial " << ratio << " (required < " << options.final_ratio_max << ")";
        }
        v.detail = detail.str();
        study.verdicts.push_back(v);
    }
    study.verdicts.push_back(decreasing_verdict("phi_decreasing", phi, options.zero_floor, 1.0));
    {
        StudyVerdict v{"resolvent_bound", true, ""};
        double worst = 0.0;
        for (const auto& p : study.points) {
            if (p.weighted_norm_f == 0.0) continue;
            const double ratio = problem.shift * p.weighted_norm_u / p.weighted_norm_f;
            worst = std::max(worst, ratio);
            if (ratio > 1.0 + 1e-12) v.pass = false;
        }
        std::ostringstream detail;
        detail << "max m ||u||_nu / ||f||_nu = " << worst;
        v.detail = detail.str();
        study.verdicts.push_back(v);
    }
    return study;
}

SemigroupStudy semigroup_study(const HomogProblem& problem, const Eigen::MatrixXd& theta,
                               const std::vector<double>& eps, const SemigroupOptions& options) {
    require_decreasing(eps);
    if (!(options.dt > 0.0) || !(options.horizon >= 0.0))
        throw ConfigError("semigroup study: dt must be positive and the horizon nonnegative");
    const double steps_real = options.horizon / options.dt;
    const int steps = static_cast<int>(std::llround(steps_real));
    if (std::abs(steps_real - steps) > 1e-9 * std::max(1.0, steps_real))
        throw ConfigError("semigroup study: horizon must be a multiple of dt");
    const int d = problem.kernel.dim();
    if (theta.rows() != d || theta.cols() != d) throw ConfigError("semigroup study: Theta dimension mismatch");

    SemigroupStudy study;
    study.horizon = options.horizon;
    study.dt = options.dt;
    for (int k = 0; k <= steps; ++k) study.times.push_back(k * options.dt);
    study.points.resize(eps.size());

    parallel_for(eps.size(), options.threads, [&](std::size_t e) {
        const auto start = std::chrono::steady_clock::now();
        const SampleGrid grid = sample_grid_for(d, problem.half_width, eps[e], problem.nodes_per_cell);
        const DiscreteNonlocalOperator op =
            assemble_Leps(grid, eps[e], problem.kernel, problem.lambda, problem.mu, problem.tail_mass,
                          problem.nodes_per_cell);
        const Eigen::VectorXd f = problem.source.sample(grid);
        const Eigen::VectorXd ones = Eigen::VectorXd::Ones(f.size());
        const double mass0 = op.weighted_dot(f, ones);
        const double norm0 = op.weighted_norm(f);

        SemigroupPoint& p = study.points[e];
        p.eps = eps[e];
        p.points = grid.points;
        p.error_by_time.assign(study.times.size(), 0.0);
        p.max_norm_ratio = norm0 > 0.0 ? 1.0 : 0.0;

        const Eigen::MatrixXd step = (op.matrix() * options.dt).exp();
        Eigen::VectorXd u = f;
        double prev_norm = norm0;
        for (int k = 1; k <= steps; ++k) {
            u = step * u;
            const double nrm = op.weighted_norm(u);
            if (nrm > prev_norm * (1.0 + 1e-9) + 1e-300) {
                std::ostringstream msg;
                msg << "weighted norm grew from " << prev_norm << " to " << nrm << " at t=" << study.times[k]
                    << " (eps=" << eps[e] << ")";
                throw IntegratorError(msg.str());
            }
            prev_norm = nrm;
            if (norm0 > 0.0) p.max_norm_ratio = std::max(p.max_norm_ratio, nrm / norm0);
            if (mass0 != 0.0)
                p.mass_drift = std::max(p.mass_drift, std::abs(op.weighted_dot(u, ones) - mass0) / std::abs(mass0));
            const Eigen::VectorXd diff = u - limit_semigroup(theta, f, grid, study.times[k]);
            p.error_by_time[static_cast<std::size_t>(k)] = discrete_l2(grid, diff);
            p.sup_error_l2 = std::max(p.sup_error_l2, p.error_by_time[static_cast<std::size_t>(k)]);
            p.sup_error_max = std::max(p.sup_error_max, diff.cwiseAbs().maxCoeff());
        }
        p.runtime_s = seconds_since(start);
    });

    std::vector<double> sup;
    double drift = 0.0, growth = 0.0;
    for (const auto& p : study.points) {
        sup.push_back(p.sup_error_l2);
        drift = std::max(drift, p.mass_drift);
        growth = std::max(growth, p.max_norm_ratio);
    }
    study.verdicts.push_back(decreasing_verdict("sup_error_decreasing", sup, 1e-14, 1.0));
    {
        std::ostringstream detail;
        detail << "max relative weighted-mass drift " << drift << " (required <= " << options.mass_tol << ")";
        study.verdicts.push_back({"mass_conserved", drift <= options.mass_tol, detail.str()});
    }
    {
        std::ostringstream detail;
        detail << "max ||T(t) f||_nu / ||f||_nu = " << growth;
        study.verdicts.push_back({"contraction", growth <= 1.0 + 1e-12, detail.str()});
    }
    return study;
}

}  // namespace nlh
