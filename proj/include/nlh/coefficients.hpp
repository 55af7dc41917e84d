#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "nlh/grid.hpp"

namespace nlh {

/// One Fourier mode: cos_amp cos(2 pi k.x) + sin_amp sin(2 pi k.x).
struct TrigTerm {
    MultiIndex k{};
    double cos_amp = 0.0;
    double sin_amp = 0.0;
};

/// Periodic coefficient on R^d (period 1 in each direction).
///
/// Either a trigonometric polynomial `mean + sum terms`, or values tabulated
/// on a TorusGrid and interpolated (multi)linearly.
class CoefficientSpec {
public:
    static CoefficientSpec constant(int dim, double value);
    static CoefficientSpec trig(int dim, double mean, std::vector<TrigTerm> terms);
    static CoefficientSpec tabulated(PeriodicField values);
    /// Whitespace separated values, n^d of them, flat order of TorusGrid.
    static CoefficientSpec from_file(int dim, const std::filesystem::path& path);

    int dim() const noexcept { return dim_; }
    bool is_constant() const noexcept;
    double operator()(const Point& x) const;

    /// Guaranteed bounds on the whole torus (exact for tabulated, triangle
    /// inequality for trig).
    double lower_bound() const;
    double upper_bound() const;

    PeriodicField sample(const TorusGrid& grid, FieldRole role) const;

    double mean() const noexcept { return mean_; }
    const std::vector<TrigTerm>& terms() const noexcept { return terms_; }
    const std::optional<PeriodicField>& table() const noexcept { return table_; }

private:
    CoefficientSpec() = default;

    int dim_ = 1;
    double mean_ = 0.0;
    std::vector<TrigTerm> terms_;
    std::optional<PeriodicField> table_;
};

struct CoefficientBounds {
    double alpha1 = 0.0;
    double alpha2 = 0.0;
};

/// Observed (min, max) over both fields; throws CoefficientBoundsError if
/// any node is nonpositive.
CoefficientBounds validate_coefficients(const PeriodicField& lambda, const PeriodicField& mu);

/// nu = mu / lambda node-wise.
PeriodicField weight_field(const PeriodicField& lambda, const PeriodicField& mu);

}  // namespace nlh
