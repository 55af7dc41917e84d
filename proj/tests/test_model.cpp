#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "doctest.h"
#include "nlh/errors.hpp"
#include "nlh/fold.hpp"
#include "nlh/kernel.hpp"
#include "support.hpp"

using namespace nlh;
using nlh::test::kTwoPi;

namespace {

double gk(const std::function<double(double)>& g, double lo, double hi) {
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(g, lo, hi, 25, 1e-14);
}

double kernel_at(const Kernel& k, double z) {
    const double zz[1] = {z};
    return k(zz);
}

}  // namespace

TEST_CASE("kernel moments of the unit gaussian in one dimension") {
    const auto m = kernel_moments(Kernel::gaussian(1, 1.0));
    CHECK(m.mass == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(m.first[0]) < 1e-14);
    CHECK(m.second(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m.abs_first == doctest::Approx(std::sqrt(2.0 / std::numbers::pi)).epsilon(1e-12));
    CHECK(m.fourth_component == doctest::Approx(3.0).epsilon(1e-10));
}

TEST_CASE("compact bump is normalized and even") {
    const auto k = Kernel::compact_bump(1, 0.25);
    const auto m = kernel_moments(k);
    CHECK(m.mass == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(m.first[0]) < 1e-14);
    CHECK(k.support_radius() == 0.25);
    CHECK(kernel_at(k, 0.26) == 0.0);
    // Oracle: adaptive quadrature of z^2 a(z) on the support.
    const double m2 = gk([&](double z) { return z * z * kernel_at(k, z); }, -0.25, 0.25);
    CHECK(m.second(0, 0) == doctest::Approx(m2).epsilon(1e-10));
}

TEST_CASE("second moment of a two-dimensional gaussian against a tensor trapezoid oracle") {
    const auto k = Kernel::gaussian(2, 0.3);
    const auto m = kernel_moments(k);
    // Trapezoid on a periodic-like rapidly decaying integrand is spectrally accurate.
    const double h = 0.01;
    const int half = 300;
    double m00 = 0.0, m01 = 0.0, m11 = 0.0, mass = 0.0;
    for (int i = -half; i <= half; ++i)
        for (int j = -half; j <= half; ++j) {
            const double z[2] = {i * h, j * h};
            const double a = k(z) * h * h;
            mass += a;
            m00 += a * z[0] * z[0];
            m01 += a * z[0] * z[1];
            m11 += a * z[1] * z[1];
        }
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(m.second(0, 0) - m00) < 1e-10);
    CHECK(std::abs(m.second(1, 1) - m11) < 1e-10);
    CHECK(std::abs(m.second(0, 1) - m01) < 1e-10);
    CHECK(std::abs(m.second(0, 0) - 0.09) < 1e-10);
    CHECK(std::abs(m.second(1, 1) - 0.09) < 1e-10);
    CHECK(std::abs(m.second(0, 1)) < 1e-10);
}

TEST_CASE("scale multiplies every moment") {
    const auto m = kernel_moments(Kernel::gaussian(1, 0.5, 2.5));
    CHECK(m.mass == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(m.second(0, 0) == doctest::Approx(2.5 * 0.25).epsilon(1e-12));
}

TEST_CASE("heavy tails make the second moment diverge") {
    auto cauchy = [](double r) { return 1.0 / (1.0 + r * r); };
    CHECK_THROWS_AS(radial_moment(cauchy, 1, 2, std::numeric_limits<double>::infinity()),
                    MomentDivergenceError);
    // The same profile has a finite mass in d = 1: pi.
    CHECK(radial_moment(cauchy, 1, 0, std::numeric_limits<double>::infinity(), 1e-10) ==
          doctest::Approx(std::numbers::pi).epsilon(1e-6));
}

TEST_CASE("tabulated kernel validates its table") {
    CHECK_THROWS_AS(Kernel::tabulated(1, {0.0, 0.1, 0.05}, {1.0, 0.5, 0.0}), Error);
    CHECK_THROWS_AS(Kernel::tabulated(1, {-0.1, 0.0, 0.2}, {0.3, 1.0, 0.0}), Error);  // not even
    const auto k = Kernel::tabulated(1, {0.0, 0.5}, {1.0, 0.0});
    // Hat function of half width 1/2: mass 1/2, second moment 2 * int_0^0.5 z^2 (1 - 2z) dz.
    const auto m = kernel_moments(k);
    CHECK(m.mass == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(m.second(0, 0) == doctest::Approx(2.0 * (0.125 / 3.0 - 2.0 * 0.0625 / 4.0)).epsilon(1e-12));
}

TEST_CASE("folded unit gaussian matches its Poisson-summation series") {
    const TorusGrid grid(1, 64);
    const auto folded = fold_kernel(Kernel::gaussian(1, 1.0), grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double eta = grid.node(i)[0];
        double series = 1.0;
        for (int m = 1; m <= 5; ++m)
            series += 2.0 * std::exp(-2.0 * std::numbers::pi * std::numbers::pi * m * m) * std::cos(kTwoPi * m * eta);
        CHECK(std::abs(folded.ahat.values(i, 0) - series) < 1e-12);
    }
    CHECK(std::abs(folded.ahat.values(0, 0) - 1.0) < 1e-8);
    CHECK(folded.tail_bound <= folded.tail_tol);
}

TEST_CASE("folding preserves mass") {
    const TorusGrid grid(1, 64);
    const auto folded = fold_kernel(Kernel::gaussian(1, 0.2), grid);
    CHECK(std::abs(folded.ahat.integral() - 1.0) < 1e-10);
}

TEST_CASE("compact bump folds onto a single shell") {
    const auto k = Kernel::compact_bump(1, 0.25);
    for (int n : {16, 37, 128}) {
        const TorusGrid grid(1, n);
        const auto folded = fold_kernel(k, grid);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double w = grid.centered_node(i)[0];
            CHECK(folded.ahat.values(i, 0) == doctest::Approx(kernel_at(k, w)).epsilon(1e-14));
            CHECK(std::abs(folded.bhat.values(i, 0) - kernel_at(k, w) * w) < 1e-13);
        }
    }
}

TEST_CASE("first-moment fold integrates to zero for even kernels") {
    for (const auto& k : {Kernel::gaussian(1, 0.3), Kernel::compact_bump(1, 0.25), Kernel::gaussian(1, 0.9)}) {
        const TorusGrid grid(1, 50);
        CHECK(std::abs(fold_moment_kernel(k, grid).integral()) < 1e-10);
    }
    const TorusGrid grid2(2, 16);
    const auto b = fold_moment_kernel(Kernel::gaussian(2, 0.3), grid2);
    CHECK(std::abs(b.integral(0)) < 1e-10);
    CHECK(std::abs(b.integral(1)) < 1e-10);
}

TEST_CASE("first-moment fold against a direct lattice sum") {
    const auto k = Kernel::gaussian(1, 0.3);
    const TorusGrid grid(1, 128);
    const auto b = fold_moment_kernel(k, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double eta = grid.node(i)[0];
        double sum = 0.0;
        for (int m = -20; m <= 20; ++m) sum += kernel_at(k, eta + m) * (eta + m);
        CHECK(std::abs(b.values(i, 0) - sum) < 1e-9);
    }
}

TEST_CASE("second-moment fold of a two-dimensional gaussian integrates to M2") {
    const TorusGrid grid(2, 24);
    const auto folded = fold_kernel(Kernel::gaussian(2, 0.3), grid);
    CHECK(folded.chat.components() == 4);
    CHECK(folded.chat.integral(0) == doctest::Approx(0.09).epsilon(1e-9));
    CHECK(folded.chat.integral(3) == doctest::Approx(0.09).epsilon(1e-9));
    CHECK(std::abs(folded.chat.integral(1)) < 1e-10);
}

TEST_CASE("unreachable tail tolerance raises a truncation error") {
    const TorusGrid grid(1, 16);
    CHECK_THROWS_AS(fold_kernel(Kernel::gaussian(1, 20.0), grid, 1e-10, 2), TruncationError);
    try {
        fold_kernel(Kernel::gaussian(1, 20.0), grid, 1e-10, 2);
    } catch (const TruncationError& e) {
        CHECK(e.achieved() > 1e-10);
    }
}

TEST_CASE("coefficient validation") {
    const TorusGrid grid(1, 64);
    const auto one = CoefficientSpec::constant(1, 1.0).sample(grid, FieldRole::lambda);
    auto b = validate_coefficients(one, one);
    CHECK(b.alpha1 == 1.0);
    CHECK(b.alpha2 == 1.0);

    const auto mu = nlh::test::sinusoid(1).sample(grid, FieldRole::mu);
    b = validate_coefficients(one, mu);
    CHECK(b.alpha1 == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(b.alpha2 == doctest::Approx(1.5).epsilon(1e-12));  // 64 nodes hit the extrema exactly

    const auto mu_odd = nlh::test::sinusoid(1).sample(TorusGrid(1, 30), FieldRole::mu);
    const auto one30 = CoefficientSpec::constant(1, 1.0).sample(TorusGrid(1, 30), FieldRole::lambda);
    b = validate_coefficients(one30, mu_odd);
    CHECK(b.alpha1 >= 0.5);
    CHECK(b.alpha1 < 0.5 + 0.5 * (1.0 - std::cos(kTwoPi / 30)));
    CHECK(b.alpha2 <= 1.5);

    auto bad = mu;
    bad.values(7, 0) = 0.0;
    CHECK_THROWS_AS(validate_coefficients(one, bad), CoefficientBoundsError);
    CHECK_THROWS_AS(validate_coefficients(one30, mu), GridMismatchError);
}

TEST_CASE("trigonometric coefficient bounds and evaluation") {
    const auto mu = nlh::test::sinusoid(1);
    CHECK(mu.lower_bound() == doctest::Approx(0.5));
    CHECK(mu.upper_bound() == doctest::Approx(1.5));
    CHECK(mu(nlh::test::point(0.25)) == doctest::Approx(1.5));
    CHECK(mu(nlh::test::point(1.25)) == doctest::Approx(1.5));
    CHECK(!mu.is_constant());
    CHECK(CoefficientSpec::constant(2, 3.0).is_constant());
}

TEST_CASE("tabulated coefficient interpolates between nodes") {
    const TorusGrid grid(1, 4);
    Eigen::MatrixXd v(4, 1);
    v << 1.0, 2.0, 3.0, 2.0;
    const auto c = CoefficientSpec::tabulated(PeriodicField(grid, v, FieldRole::mu));
    CHECK(c(nlh::test::point(0.125)) == doctest::Approx(1.5));
    CHECK(c(nlh::test::point(0.875)) == doctest::Approx(1.5));  // wraps to node 0
    CHECK(c.lower_bound() == 1.0);
    CHECK(c.upper_bound() == 3.0);
}

TEST_CASE("mass function for constant coefficients") {
    const TorusGrid grid(1, 64);
    const auto folded = fold_kernel(Kernel::gaussian(1, 0.3, 2.0), grid);
    const auto mu = CoefficientSpec::constant(1, 1.7).sample(grid, FieldRole::mu);
    const auto q = mass_function(folded, mu);
    for (std::size_t i = 0; i < grid.size(); ++i) CHECK(std::abs(q.values(i, 0) - 1.7 * 2.0) < 1e-10);
}

TEST_CASE("mass function with a flat fold reduces to the mean of mu") {
    const TorusGrid grid(1, 64);
    const auto folded = fold_kernel(Kernel::gaussian(1, 1.0), grid);
    const auto mu = nlh::test::sinusoid(1).sample(grid, FieldRole::mu);
    const auto q = mass_function(folded, mu);
    for (std::size_t i = 0; i < grid.size(); ++i) CHECK(std::abs(q.values(i, 0) - mu.mean()) < 1e-7);
}

TEST_CASE("mass function against a brute-force double loop") {
    const TorusGrid grid(1, 128);
    const auto k = Kernel::compact_bump(1, 0.25);
    const auto folded = fold_kernel(k, grid);
    const auto mu = nlh::test::sinusoid(1).sample(grid, FieldRole::mu);
    const auto q = mass_function(folded, mu);
    const double h = grid.spacing();
    for (int i = 0; i < 128; ++i) {
        double sum = 0.0;
        for (int j = 0; j < 128; ++j) {
            double w = (i - j) * h;
            w -= std::floor(w + 0.5);
            sum += kernel_at(k, w) * mu.values(j, 0) * h;
        }
        CHECK(std::abs(q.values(i, 0) - sum) < 1e-12);
    }
}

TEST_CASE("periodic interpolation is exact at nodes and linear between them") {
    const TorusGrid grid(2, 8);
    PeriodicField f(grid, 1);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto x = grid.node(i);
        f.values(i, 0) = std::sin(kTwoPi * x[0]) + std::cos(kTwoPi * x[1]);
    }
    for (std::size_t i = 0; i < grid.size(); ++i) {
        auto x = grid.node(i);
        CHECK(interpolate_periodic(f, 0, x) == doctest::Approx(f.values(i, 0)));
        x[0] += 3.0;
        x[1] -= 1.0;
        CHECK(interpolate_periodic(f, 0, x) == doctest::Approx(f.values(i, 0)));
    }
    const double mid = interpolate_periodic(f, 0, nlh::test::point(1.0 / 16, 0.0));
    CHECK(mid == doctest::Approx(0.5 * (f.values(0, 0) + f.values(1, 0))));
}
