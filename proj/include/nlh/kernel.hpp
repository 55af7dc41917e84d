#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "nlh/grid.hpp"

namespace nlh {

enum class KernelFamily { gaussian, compact_bump, tabulated };

std::string_view to_string(KernelFamily family);

/// Even, nonnegative jump kernel a(z) on R^d, stored as a radial profile.
///
/// - gaussian(sigma):  (2 pi sigma^2)^{-d/2} exp(-|z|^2 / (2 sigma^2))
/// - compact_bump(r):  C exp(-1 / (1 - |z|^2/r^2)^2) for |z| < r, unit mass
/// - tabulated:        piecewise linear through (|z|, a) samples, zero beyond
///
/// Every family is multiplied by `scale`.
class Kernel {
public:
    static Kernel gaussian(int dim, double sigma, double scale = 1.0);
    static Kernel compact_bump(int dim, double radius, double scale = 1.0);
    /// `z` strictly increasing. In d = 1 a table spanning negative z is
    /// checked for evenness; otherwise `z` must start at 0 (radial profile).
    static Kernel tabulated(int dim, std::vector<double> z, std::vector<double> a,
                            double scale = 1.0);
    /// Two-column plain text file "z a(z)", '#' comments allowed.
    static Kernel from_table_file(int dim, const std::filesystem::path& path,
                                  double scale = 1.0);

    KernelFamily family() const noexcept { return family_; }
    int dim() const noexcept { return dim_; }
    double scale() const noexcept { return scale_; }
    /// sigma for gaussian, radius for compact_bump, 0 otherwise.
    double length() const noexcept { return length_; }

    double profile(double r) const;
    double operator()(std::span<const double> z) const;

    /// Radius beyond which a vanishes identically (+inf for gaussian).
    double support_radius() const;
    /// sup_{r >= rho} profile(r).
    double tail_sup(double rho) const;
    /// Smallest radius whose exterior carries at most `tail_mass` of a.
    double effective_radius(double tail_mass) const;
    /// max_z a(z).
    double peak() const;
    /// Total mass a_1.
    double mass() const { return mass_; }

    /// Draws z with density a / a_1.
    template <class Rng>
    void sample(Rng& rng, std::span<double> z) const;

    const std::vector<double>& table_r() const noexcept { return table_r_; }
    const std::vector<double>& table_a() const noexcept { return table_a_; }

private:
    Kernel() = default;
    void finalize();

    KernelFamily family_ = KernelFamily::gaussian;
    int dim_ = 1;
    double scale_ = 1.0;
    double length_ = 0.0;
    double norm_ = 1.0;  // family normalization before scale
    double mass_ = 0.0;
    std::vector<double> table_r_;
    std::vector<double> table_a_;
};

struct KernelMoments {
    double mass = 0.0;              // a_1
    Eigen::VectorXd first;          // M_1
    Eigen::MatrixXd second;         // M_2
    double abs_first = 0.0;         // int |z| a
    double fourth_component = 0.0;  // int z_1^4 a
};

/// Moments of a up to `order` (<= 2; the |z| and z_1^4 entries are filled
/// whenever order == 2). Throws MomentDivergenceError.
KernelMoments kernel_moments(const Kernel& kernel, int order = 2);

/// int_{R^d} |z|^power p(|z|) dz for a radial profile supported in
/// [0, support] (support may be +inf). Throws MomentDivergenceError.
double radial_moment(const std::function<double(double)>& profile, int dim, int power,
                     double support, double rel_tol = 1e-13);

/// Surface area of the unit sphere in R^d.
double unit_sphere_area(int dim);

template <class Rng>
void Kernel::sample(Rng& rng, std::span<double> z) const {
    if (family_ == KernelFamily::gaussian) {
        std::normal_distribution<double> normal(0.0, length_);
        for (int c = 0; c < dim_; ++c) z[c] = normal(rng);
        return;
    }
    // Uniform proposal on the bounding box, accept with a(z) / peak.
    const double box = support_radius();
    const double top = peak();
    std::uniform_real_distribution<double> uniform(-box, box);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (;;) {
        double r2 = 0.0;
        for (int c = 0; c < dim_; ++c) {
            z[c] = uniform(rng);
            r2 += z[c] * z[c];
        }
        if (unit(rng) * top < profile(std::sqrt(r2))) return;
    }
}

}  // namespace nlh
