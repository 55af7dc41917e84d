#include "nlh/kernel.hpp"

#include <algorithm>
#include <fstream>
#include <numbers>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "nlh/errors.hpp"

namespace nlh {

namespace {

double bump_shape(double s) {
    if (s >= 1.0) return 0.0;
    const double t = 1.0 - s * s;
    return std::exp(-1.0 / (t * t));
}

double integrate_segment(const std::function<double(double)>& g, double lo, double hi,
                         double rel_tol, double* err) {
    using boost::math::quadrature::gauss_kronrod;
    double e = 0.0;
    const double v = gauss_kronrod<double, 31>::integrate(g, lo, hi, 15, rel_tol, &e);
    *err += e;
    return v;
}

double radial_moment_impl(const std::function<double(double)>& profile, int dim, int power,
                          const std::vector<double>& breaks, double rel_tol) {
    const int exponent = dim - 1 + power;
    auto g = [&](double r) {
        if (r == 0.0) return exponent == 0 ? profile(0.0) : 0.0;
        return profile(r) * std::pow(r, exponent);
    };
    double total = 0.0;
    double err = 0.0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        if (breaks[i + 1] > breaks[i]) total += integrate_segment(g, breaks[i], breaks[i + 1], rel_tol, &err);
    }
    const double value = unit_sphere_area(dim) * total;
    const double abs_err = unit_sphere_area(dim) * err;
    if (!std::isfinite(value) || !std::isfinite(abs_err) || abs_err > 1e-6 * std::max(std::abs(value), 1e-300))
        throw MomentDivergenceError("radial moment of order " + std::to_string(power) +
                                    " did not converge (estimate " + std::to_string(value) +
                                    ", error " + std::to_string(abs_err) + ")");
    return value;
}

}  // namespace

std::string_view to_string(KernelFamily family) {
    switch (family) {
        case KernelFamily::gaussian: return "gaussian";
        case KernelFamily::compact_bump: return "compact_bump";
        case KernelFamily::tabulated: return "tabulated";
    }
    return "unknown";
}

double unit_sphere_area(int dim) {
    switch (dim) {
        case 1: return 2.0;
        case 2: return 2.0 * std::numbers::pi;
        case 3: return 4.0 * std::numbers::pi;
        default: throw Error("unit_sphere_area: unsupported dimension");
    }
}

double radial_moment(const std::function<double(double)>& profile, int dim, int power,
                     double support, double rel_tol) {
    std::vector<double> breaks{0.0, support};
    return radial_moment_impl(profile, dim, power, breaks, rel_tol);
}

Kernel Kernel::gaussian(int dim, double sigma, double scale) {
    if (!(sigma > 0.0)) throw Error("gaussian kernel: sigma must be positive");
    Kernel k;
    k.family_ = KernelFamily::gaussian;
    k.dim_ = dim;
    k.length_ = sigma;
    k.scale_ = scale;
    k.norm_ = std::pow(2.0 * std::numbers::pi * sigma * sigma, -0.5 * dim);
    k.finalize();
    return k;
}

Kernel Kernel::compact_bump(int dim, double radius, double scale) {
    if (!(radius > 0.0)) throw Error("compact_bump kernel: radius must be positive");
    Kernel k;
    k.family_ = KernelFamily::compact_bump;
    k.dim_ = dim;
    k.length_ = radius;
    k.scale_ = scale;
    const double unit_mass = radial_moment(bump_shape, dim, 0, 1.0, 1e-14);
    k.norm_ = 1.0 / (unit_mass * std::pow(radius, dim));
    k.finalize();
    return k;
}

Kernel Kernel::tabulated(int dim, std::vector<double> z, std::vector<double> a, double scale) {
    if (z.size() != a.size() || z.size() < 2) throw Error("tabulated kernel: need at least two (z, a) samples");
    for (std::size_t i = 1; i < z.size(); ++i)
        if (!(z[i] > z[i - 1])) throw Error("tabulated kernel: z must be strictly increasing");
    for (double v : a)
        if (!(v >= 0.0) || !std::isfinite(v)) throw Error("tabulated kernel: a(z) must be finite and >= 0");

    Kernel k;
    k.family_ = KernelFamily::tabulated;
    k.dim_ = dim;
    k.scale_ = scale;
    k.norm_ = 1.0;
    if (z.front() < 0.0) {
        if (dim != 1) throw Error("tabulated kernel: only d = 1 tables may span negative z");
        const double top = *std::max_element(a.begin(), a.end());
        const std::size_t m = z.size();
        for (std::size_t i = 0; i < m; ++i) {
            const std::size_t j = m - 1 - i;
            if (std::abs(z[i] + z[j]) > 1e-12 * std::max(1.0, std::abs(z[i])))
                throw Error("tabulated kernel: z samples are not symmetric about 0");
            if (std::abs(a[i] - a[j]) > 1e-12 * top)
                throw Error("tabulated kernel: a(-z) != a(z)");
        }
        for (std::size_t i = 0; i < m; ++i) {
            if (z[i] >= 0.0) {
                k.table_r_.push_back(z[i]);
                k.table_a_.push_back(a[i]);
            }
        }
        if (k.table_r_.front() > 0.0) {
            // interpolate a(0) from the two samples straddling it
            const std::size_t j = m / 2;
            const double t = -z[j - 1] / (z[j] - z[j - 1]);
            k.table_r_.insert(k.table_r_.begin(), 0.0);
            k.table_a_.insert(k.table_a_.begin(), a[j - 1] + t * (a[j] - a[j - 1]));
        }
    } else {
        if (z.front() != 0.0) throw Error("tabulated kernel: radial table must start at z = 0");
        k.table_r_ = std::move(z);
        k.table_a_ = std::move(a);
    }
    k.finalize();
    return k;
}

Kernel Kernel::from_table_file(int dim, const std::filesystem::path& path, double scale) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open kernel table " + path.string());
    std::vector<double> z, a;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ss(line);
        double zi, ai;
        if (!(ss >> zi)) continue;
        if (!(ss >> ai)) throw Error("kernel table " + path.string() + ": malformed line '" + line + "'");
        z.push_back(zi);
        a.push_back(ai);
    }
    return tabulated(dim, std::move(z), std::move(a), scale);
}

void Kernel::finalize() {
    if (dim_ < 1 || dim_ > kMaxDim) throw Error("kernel: unsupported dimension");
    if (!(scale_ > 0.0)) throw Error("kernel: scale must be positive");
    std::vector<double> breaks{0.0};
    if (family_ == KernelFamily::tabulated) {
        breaks = table_r_;
    } else {
        breaks.push_back(support_radius());
    }
    mass_ = radial_moment_impl([this](double r) { return profile(r); }, dim_, 0, breaks, 1e-14);
    if (!(mass_ > 0.0)) throw Error("kernel: total mass must be positive");
}

double Kernel::profile(double r) const {
    r = std::abs(r);
    switch (family_) {
        case KernelFamily::gaussian:
            return scale_ * norm_ * std::exp(-0.5 * r * r / (length_ * length_));
        case KernelFamily::compact_bump:
            return scale_ * norm_ * bump_shape(r / length_);
        case KernelFamily::tabulated: {
            if (r >= table_r_.back()) return r == table_r_.back() ? scale_ * table_a_.back() : 0.0;
            auto it = std::upper_bound(table_r_.begin(), table_r_.end(), r);
            const std::size_t j = static_cast<std::size_t>(it - table_r_.begin());
            const double t = (r - table_r_[j - 1]) / (table_r_[j] - table_r_[j - 1]);
            return scale_ * (table_a_[j - 1] + t * (table_a_[j] - table_a_[j - 1]));
        }
    }
    return 0.0;
}

double Kernel::operator()(std::span<const double> z) const {
    double r2 = 0.0;
    for (int c = 0; c < dim_; ++c) r2 += z[c] * z[c];
    return profile(std::sqrt(r2));
}

double Kernel::support_radius() const {
    switch (family_) {
        case KernelFamily::gaussian: return std::numeric_limits<double>::infinity();
        case KernelFamily::compact_bump: return length_;
        case KernelFamily::tabulated: return table_r_.back();
    }
    return 0.0;
}

double Kernel::tail_sup(double rho) const {
    rho = std::max(rho, 0.0);
    if (family_ != KernelFamily::tabulated) return profile(rho);  // monotone profiles
    double s = profile(rho);
    for (std::size_t i = 0; i < table_r_.size(); ++i)
        if (table_r_[i] >= rho) s = std::max(s, scale_ * table_a_[i]);
    return s;
}

double Kernel::peak() const { return tail_sup(0.0); }

double Kernel::effective_radius(double tail_mass) const {
    auto outside = [this](double r) {
        if (r >= support_radius()) return 0.0;
        std::vector<double> breaks{r};
        if (family_ == KernelFamily::tabulated) {
            for (double t : table_r_)
                if (t > r) breaks.push_back(t);
        } else {
            breaks.push_back(support_radius());
        }
        return radial_moment_impl([this](double s) { return profile(s); }, dim_, 0, breaks, 1e-12);
    };
    const double target = tail_mass * mass_;
    double hi = std::isfinite(support_radius()) ? support_radius() : length_;
    while (outside(hi) > target) hi *= 2.0;
    double lo = 0.0;
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (outside(mid) > target ? lo : hi) = mid;
    }
    return hi;
}

KernelMoments kernel_moments(const Kernel& kernel, int order) {
    if (order < 0 || order > 2) throw Error("kernel_moments: order must be 0, 1 or 2");
    const int d = kernel.dim();
    std::vector<double> breaks{0.0};
    if (kernel.family() == KernelFamily::tabulated) {
        breaks = kernel.table_r();
    } else {
        breaks.push_back(kernel.support_radius());
    }
    auto p = [&kernel](double r) { return kernel.profile(r); };

    KernelMoments m;
    m.mass = radial_moment_impl(p, d, 0, breaks, 1e-14);
    m.first = Eigen::VectorXd::Zero(d);  // even kernel
    m.second = Eigen::MatrixXd::Zero(d, d);
    if (order >= 2) {
        const double r2 = radial_moment_impl(p, d, 2, breaks, 1e-14);
        m.second.diagonal().setConstant(r2 / d);
        m.abs_first = radial_moment_impl(p, d, 1, breaks, 1e-14);
        const double r4 = radial_moment_impl(p, d, 4, breaks, 1e-14);
        m.fourth_component = 3.0 * r4 / (d * (d + 2.0));
    }
    return m;
}

}  // namespace nlh
