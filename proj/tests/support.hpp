#pragma once

#include <numbers>

#include "nlh/coefficients.hpp"
#include "nlh/grid.hpp"

namespace nlh::test {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// 1 + amp sin(2 pi x_0).
inline CoefficientSpec sinusoid(int dim, double amp = 0.5) {
    TrigTerm t;
    t.k = {1, 0, 0};
    t.sin_amp = amp;
    return CoefficientSpec::trig(dim, 1.0, {t});
}

inline Point point(double x0, double x1 = 0.0, double x2 = 0.0) { return Point{x0, x1, x2}; }

}  // namespace nlh::test
