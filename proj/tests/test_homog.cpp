#include <cmath>
#include <random>

#include "doctest.h"
#include "nlh/errors.hpp"
#include "nlh/homog.hpp"
#include "support.hpp"

using namespace nlh;
using nlh::test::sinusoid;

namespace {

Eigen::VectorXd sample(const SampleGrid& grid, const std::function<double(const Point&)>& fn) {
    Eigen::VectorXd v(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) v[i] = fn(grid.node(i));
    return v;
}

Eigen::MatrixXd scalar(double v) { return Eigen::MatrixXd::Constant(1, 1, v); }

HomogProblem constant_problem() {
    return HomogProblem{Kernel::gaussian(1, 0.3), CoefficientSpec::constant(1, 1.0), CoefficientSpec::constant(1, 1.0)};
}

HomogProblem sinusoid_problem() {
    return HomogProblem{Kernel::gaussian(1, 0.3), CoefficientSpec::constant(1, 1.0), sinusoid(1)};
}

CellSolution cell_for(const HomogProblem& p) {
    CellProblem c{p.kernel, p.lambda, p.mu};
    c.n = 128;
    c.refinement_check = false;
    return solve_cell_problem(c);
}

}  // namespace

TEST_CASE("sample grid geometry") {
    const auto g = sample_grid_for(1, 10.0, 0.1, 8);
    CHECK(g.points == 1600);
    CHECK(g.spacing() <= 0.1 / 8 * (1 + 1e-12));
    CHECK(g.node(0)[0] == -10.0);
    const auto g2 = make_sample_grid(2, 1.0, 4);
    CHECK(g2.size() == 16);
    CHECK(g2.node(5)[0] == doctest::Approx(-0.5));
    CHECK(g2.node(5)[1] == doctest::Approx(-0.5));
    CHECK(g2.cell_volume() == doctest::Approx(0.25));
    CHECK(discrete_l2(g2, Eigen::VectorXd::Ones(16)) == doctest::Approx(2.0));
}

TEST_CASE("nonlocal operator annihilates constants exactly") {
    const auto grid = make_sample_grid(1, 4.0, 256);
    const auto op = assemble_Leps(grid, 0.25, Kernel::gaussian(1, 0.3), CoefficientSpec::constant(1, 1.0), sinusoid(1));
    const Eigen::VectorXd lu = op.apply(Eigen::VectorXd::Constant(grid.size(), 3.7));
    CHECK(lu.cwiseAbs().maxCoeff() == 0.0);
    CHECK(check_structure(op).constant_defect == 0.0);
}

TEST_CASE("unit coefficients give a symmetric operator") {
    const auto grid = make_sample_grid(1, 2.0, 64);
    const auto op = assemble_Leps(grid, 0.5, Kernel::gaussian(1, 0.3), CoefficientSpec::constant(1, 1.0),
                                  CoefficientSpec::constant(1, 1.0));
    const Eigen::MatrixXd& l = op.matrix();
    CHECK((l - l.transpose()).cwiseAbs().maxCoeff() < 1e-12 * l.cwiseAbs().maxCoeff());
    CHECK(op.nu().isOnes());
}

TEST_CASE("weighted symmetry and negativity with oscillating coefficients") {
    TrigTerm lt;
    lt.k = {1, 0, 0};
    lt.cos_amp = 0.25;
    const auto lambda = CoefficientSpec::trig(1, 1.0, {lt});
    const auto grid = sample_grid_for(1, 3.0, 0.25, 8);
    const auto op = assemble_Leps(grid, 0.25, Kernel::gaussian(1, 0.3), lambda, sinusoid(1));
    const auto rep = check_structure(op, 100);
    CHECK(rep.asymmetry_relative < 1e-10);
    CHECK(rep.row_sum_defect < 1e-13);
    CHECK(rep.negative);
    CHECK(rep.max_quadratic <= 0.0);
    CHECK(rep.samples == 100);

    // Oracle for the weighted inner-product identity on two random vectors.
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n01;
    Eigen::VectorXd u(grid.size()), v(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        u[i] = n01(rng);
        v[i] = n01(rng);
    }
    const double luv = op.weighted_dot(op.apply(u), v), ulv = op.weighted_dot(u, op.apply(v));
    CHECK(std::abs(luv - ulv) < 1e-10 * std::abs(luv));
}

TEST_CASE("two-dimensional operator structure") {
    const auto grid = sample_grid_for(2, 1.5, 0.5, 8);
    const auto op = assemble_Leps(grid, 0.5, Kernel::gaussian(2, 0.3), CoefficientSpec::constant(2, 1.0), sinusoid(2));
    const auto rep = check_structure(op, 20);
    CHECK(rep.asymmetry_relative < 1e-10);
    CHECK(rep.negative);
}

TEST_CASE("assembly guards resolution and box size") {
    const auto k = Kernel::gaussian(1, 0.3);
    const auto one = CoefficientSpec::constant(1, 1.0);
    CHECK_THROWS_AS(assemble_Leps(make_sample_grid(1, 4.0, 64), 0.25, k, one, one), ResolutionError);
    CHECK_THROWS_AS(assemble_Leps(sample_grid_for(1, 0.5, 0.5, 8), 0.5, k, one, one), TruncationError);
}

TEST_CASE("resolvent on trivial data") {
    const auto grid = sample_grid_for(1, 3.0, 0.25, 8);
    const auto op = assemble_Leps(grid, 0.25, Kernel::gaussian(1, 0.3), CoefficientSpec::constant(1, 1.0), sinusoid(1));
    const auto zero = solve_resolvent_eps(op, 1.0, Eigen::VectorXd::Zero(grid.size()));
    CHECK(zero.u.isZero(0.0));
    const double m = 2.5;
    const auto ones = solve_resolvent_eps(op, m, Eigen::VectorXd::Constant(grid.size(), -m));
    CHECK((ones.u.array() - 1.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("resolvent is a weighted contraction") {
    const auto grid = sample_grid_for(1, 6.0, 0.25, 8);
    const auto op = assemble_Leps(grid, 0.25, Kernel::gaussian(1, 0.3), CoefficientSpec::constant(1, 1.0), sinusoid(1));
    const GaussianSource src;
    const Eigen::VectorXd f = src.sample(grid);
    for (double m : {0.5, 1.0, 4.0}) {
        const auto sol = solve_resolvent_eps(op, m, f);
        CHECK(sol.residual < 1e-10);
        CHECK(m * sol.weighted_norm_u <= sol.weighted_norm_f * (1 + 1e-12));
        CHECK(sol.weighted_norm_u <= sol.weighted_norm_f * (1 + 1e-12) / m);
    }
}

TEST_CASE("limit resolvent reproduces a manufactured solution") {
    const auto grid = make_sample_grid(1, 10.0, 400);
    const Eigen::VectorXd f = sample(grid, [](const Point& x) { return (2 * x[0] * x[0] - 2) * std::exp(-x[0] * x[0]); });
    const Eigen::VectorXd exact = sample(grid, [](const Point& x) { return std::exp(-x[0] * x[0]); });
    const auto sol = solve_limit_resolvent(scalar(0.5), 1.0, f, grid);
    CHECK((sol.u - exact).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(sol.residual < 1e-10);
    const Eigen::VectorXd dexact = sample(grid, [](const Point& x) { return -2 * x[0] * std::exp(-x[0] * x[0]); });
    CHECK((sol.gradient.col(0) - dexact).cwiseAbs().maxCoeff() < 1e-6);

    const auto c = solve_limit_resolvent(scalar(0.5), 2.0, Eigen::VectorXd::Constant(grid.size(), -2.0 * 1.25), grid);
    CHECK((c.u.array() - 1.25).abs().maxCoeff() < 1e-12);
}

TEST_CASE("limit resolvent keeps radial symmetry for isotropic Theta") {
    const auto grid = make_sample_grid(2, 6.0, 96);
    const Eigen::VectorXd f = sample(grid, [](const Point& x) { return -std::exp(-(x[0] * x[0] + x[1] * x[1])); });
    const Eigen::MatrixXd theta = 0.7 * Eigen::MatrixXd::Identity(2, 2);
    const auto sol = solve_limit_resolvent(theta, 1.0, f, grid);
    // Nodes (i, j) and (j, i), and (i, j) and (m - i, j) for i > 0, lie on the same circle.
    const int m = grid.points;
    double dev = 0.0;
    for (int i = 1; i < m; ++i)
        for (int j = 1; j < m; ++j) {
            const double u = sol.u[i + m * j];
            dev = std::max(dev, std::abs(u - sol.u[j + m * i]));
            dev = std::max(dev, std::abs(u - sol.u[(m - i) + m * j]));
        }
    CHECK(dev < 1e-8);
}

TEST_CASE("limit semigroup is the closed-form heat flow") {
    const double theta = 0.37, w2 = 0.5, t = 1.0;
    const auto grid = make_sample_grid(1, 10.0, 512);
    const GaussianSource src;
    const Eigen::VectorXd u = limit_semigroup(scalar(theta), src.sample(grid), grid, t);
    const double s2 = w2 + 2 * theta * t;
    const Eigen::VectorXd exact =
        sample(grid, [&](const Point& x) { return -std::sqrt(w2 / s2) * std::exp(-x[0] * x[0] / (2 * s2)); });
    CHECK((u - exact).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((limit_semigroup(scalar(theta), src.sample(grid), grid, 0.0) - src.sample(grid)).cwiseAbs().maxCoeff() <
          1e-14);

    // Two dimensions with anisotropic Theta: product of one-dimensional flows.
    const auto g2 = make_sample_grid(2, 8.0, 96);
    Eigen::MatrixXd th2(2, 2);
    th2 << 0.3, 0.0, 0.0, 0.6;
    const Eigen::VectorXd u2 = limit_semigroup(th2, src.sample(g2), g2, t);
    const double a = w2 + 2 * 0.3 * t, b = w2 + 2 * 0.6 * t;
    const Eigen::VectorXd e2 = sample(g2, [&](const Point& x) {
        return -std::sqrt(w2 / a) * std::sqrt(w2 / b) * std::exp(-x[0] * x[0] / (2 * a) - x[1] * x[1] / (2 * b));
    });
    CHECK((u2 - e2).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("spectral derivatives of a gaussian") {
    const auto grid = make_sample_grid(1, 10.0, 256);
    const Eigen::VectorXd u = sample(grid, [](const Point& x) { return std::exp(-x[0] * x[0]); });
    Eigen::MatrixXd g, h;
    spectral_derivatives(grid, u, g, h);
    const Eigen::VectorXd d2 = sample(grid, [](const Point& x) { return (4 * x[0] * x[0] - 2) * std::exp(-x[0] * x[0]); });
    CHECK((h.col(0) - d2).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("corrector expansion") {
    const auto p = sinusoid_problem();
    const auto cell = cell_for(p);
    const auto grid = sample_grid_for(1, 10.0, 0.1, 8);
    const auto u0 = solve_limit_resolvent(cell.theta, 1.0, p.source.sample(grid), grid);

    const PeriodicField z1(cell.grid, 1), z2(cell.grid, 1);
    CHECK((corrector_expansion(u0, z1, z2, 0.1, grid) - u0.u).cwiseAbs().maxCoeff() == 0.0);

    // First-order scaling: halving eps halves ||v - u0||.
    double prev = 0.0;
    for (double eps : {0.2, 0.1, 0.05}) {
        const auto g = sample_grid_for(1, 10.0, eps, 8);
        const auto u = solve_limit_resolvent(cell.theta, 1.0, p.source.sample(g), g);
        const double gap = discrete_l2(g, corrector_expansion(u, cell.kappa1, cell.kappa2, eps, g) - u.u);
        if (prev > 0.0) CHECK(gap / prev == doctest::Approx(0.5).epsilon(0.2));
        prev = gap;
    }
}

TEST_CASE("main-lemma residual") {
    const auto p = constant_problem();
    const auto cell = cell_for(p);
    CHECK(cell.kappa1.values.cwiseAbs().maxCoeff() < 1e-12);

    // u0 constant: phi vanishes identically.
    {
        const auto grid = sample_grid_for(1, 4.0, 0.25, 8);
        const auto op = assemble_Leps(grid, 0.25, p.kernel, p.lambda, p.mu);
        LimitSolution c;
        c.u = Eigen::VectorXd::Constant(grid.size(), 2.0);
        c.gradient = Eigen::MatrixXd::Zero(grid.size(), 1);
        c.hessian = Eigen::MatrixXd::Zero(grid.size(), 1);
        CHECK(main_lemma_residual(op, c.u, cell.theta, c) == 0.0);
    }

    // Constant coefficients: phi is the nonlocal minus local second difference,
    // O(eps^2) by Taylor expansion.
    std::vector<double> phi;
    for (double eps : {0.4, 0.2, 0.1}) {
        const auto grid = sample_grid_for(1, 10.0, eps, 8);
        const auto op = assemble_Leps(grid, eps, p.kernel, p.lambda, p.mu);
        const auto u0 = solve_limit_resolvent(cell.theta, 1.0, p.source.sample(grid), grid);
        const auto v = corrector_expansion(u0, cell.kappa1, cell.kappa2, eps, grid);
        CHECK((v - u0.u).cwiseAbs().maxCoeff() < 1e-12);
        phi.push_back(main_lemma_residual(op, v, cell.theta, u0));
    }
    CHECK(phi[1] / phi[0] < 0.3);
    CHECK(phi[2] / phi[1] < 0.3);
}

TEST_CASE("resolvent convergence study") {
    SUBCASE("zero source gives zero errors") {
        auto p = sinusoid_problem();
        p.source.amplitude = 0.0;
        const auto study = resolvent_convergence_study(p, cell_for(p), {0.4, 0.2});
        for (const auto& pt : study.points) {
            CHECK(pt.error_l2 == 0.0);
            CHECK(pt.phi_norm == 0.0);
        }
        CHECK(study.pass());
    }
    SUBCASE("constant coefficients converge") {
        const auto p = constant_problem();
        const auto study = resolvent_convergence_study(p, cell_for(p), {0.4, 0.2, 0.1});
        CHECK(study.pass());
        CHECK(study.points[2].error_l2 < study.points[0].error_l2);
    }
    SUBCASE("oscillating mu converges") {
        const auto p = sinusoid_problem();
        const auto study = resolvent_convergence_study(p, cell_for(p), {0.4, 0.2, 0.1}, StudyOptions{2});
        CHECK(study.pass());
        CHECK(study.points.size() == 3);
        CHECK(study.points[1].phi_norm < study.points[0].phi_norm);
    }
    SUBCASE("eps list must decrease") {
        const auto p = constant_problem();
        CHECK_THROWS_AS(resolvent_convergence_study(p, cell_for(p), {0.2, 0.4}), ConfigError);
        CHECK_THROWS_AS(require_decreasing({0.4, -0.1}), ConfigError);
        CHECK_THROWS_AS(require_decreasing({}), ConfigError);
    }
}

TEST_CASE("semigroup study") {
    SUBCASE("oscillating mu, coarse eps") {
        const auto p = sinusoid_problem();
        const auto cell = cell_for(p);
        SemigroupOptions o;
        o.threads = 2;
        const auto study = semigroup_study(p, cell.theta, {0.4, 0.2}, o);
        CHECK(study.pass());
        CHECK(study.times.front() == 0.0);
        CHECK(study.times.back() == doctest::Approx(1.0));
        for (const auto& pt : study.points) {
            CHECK(pt.error_by_time.front() == 0.0);  // T(0) f = f
            CHECK(pt.mass_drift < 1e-8);
            CHECK(pt.max_norm_ratio <= 1.0 + 1e-12);
        }
        CHECK(study.points[1].sup_error_l2 < study.points[0].sup_error_l2);
    }
    SUBCASE("invalid time step") {
        const auto p = constant_problem();
        SemigroupOptions o;
        o.dt = 0.3;
        CHECK_THROWS_AS(semigroup_study(p, cell_for(p).theta, {0.4}, o), ConfigError);
    }
}
