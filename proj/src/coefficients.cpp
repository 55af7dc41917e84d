#include "nlh/coefficients.hpp"

#include <fstream>
#include <numbers>

#include "nlh/errors.hpp"

namespace nlh {

CoefficientSpec CoefficientSpec::constant(int dim, double value) {
    return trig(dim, value, {});
}

CoefficientSpec CoefficientSpec::trig(int dim, double mean, std::vector<TrigTerm> terms) {
    if (dim < 1 || dim > kMaxDim) throw Error("coefficient: unsupported dimension");
    CoefficientSpec s;
    s.dim_ = dim;
    s.mean_ = mean;
    s.terms_ = std::move(terms);
    return s;
}

CoefficientSpec CoefficientSpec::tabulated(PeriodicField values) {
    if (values.components() != 1) throw Error("coefficient table must be scalar");
    CoefficientSpec s;
    s.dim_ = values.grid.dim();
    s.mean_ = values.mean();
    s.table_ = std::move(values);
    return s;
}

CoefficientSpec CoefficientSpec::from_file(int dim, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open coefficient table " + path.string());
    std::vector<double> v;
    std::string tok;
    while (in >> tok) {
        if (tok.front() == '#') {
            std::getline(in, tok);
            continue;
        }
        v.push_back(std::stod(tok));
    }
    const int n = static_cast<int>(std::lround(std::pow(static_cast<double>(v.size()), 1.0 / dim)));
    TorusGrid grid(dim, n);
    if (grid.size() != v.size())
        throw Error("coefficient table " + path.string() + ": value count is not n^d");
    PeriodicField f(grid, Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
    return tabulated(std::move(f));
}

bool CoefficientSpec::is_constant() const noexcept {
    if (table_) return table_->values.maxCoeff() == table_->values.minCoeff();
    for (const auto& t : terms_)
        if (t.cos_amp != 0.0 || t.sin_amp != 0.0) return false;
    return true;
}

double CoefficientSpec::operator()(const Point& x) const {
    if (table_) return interpolate_periodic(*table_, 0, x);
    double v = mean_;
    for (const auto& t : terms_) {
        double phase = 0.0;
        for (int c = 0; c < dim_; ++c) phase += t.k[c] * x[c];
        phase *= 2.0 * std::numbers::pi;
        if (t.cos_amp != 0.0) v += t.cos_amp * std::cos(phase);
        if (t.sin_amp != 0.0) v += t.sin_amp * std::sin(phase);
    }
    return v;
}

double CoefficientSpec::lower_bound() const {
    if (table_) return table_->values.minCoeff();
    double v = mean_;
    for (const auto& t : terms_) v -= std::hypot(t.cos_amp, t.sin_amp);
    return v;
}

double CoefficientSpec::upper_bound() const {
    if (table_) return table_->values.maxCoeff();
    double v = mean_;
    for (const auto& t : terms_) v += std::hypot(t.cos_amp, t.sin_amp);
    return v;
}

PeriodicField CoefficientSpec::sample(const TorusGrid& grid, FieldRole role) const {
    if (grid.dim() != dim_) throw GridMismatchError("coefficient sampled on a grid of different dimension");
    PeriodicField f(grid, 1, role);
    for (std::size_t i = 0; i < grid.size(); ++i) f.values(static_cast<Eigen::Index>(i), 0) = (*this)(grid.node(i));
    return f;
}

CoefficientBounds validate_coefficients(const PeriodicField& lambda, const PeriodicField& mu) {
    require_same_grid(lambda.grid, mu.grid, "validate_coefficients");
    CoefficientBounds b;
    b.alpha1 = std::min(lambda.values.minCoeff(), mu.values.minCoeff());
    b.alpha2 = std::max(lambda.values.maxCoeff(), mu.values.maxCoeff());
    if (!(b.alpha1 > 0.0))
        throw CoefficientBoundsError("coefficients must be strictly positive; observed minimum " +
                                     std::to_string(b.alpha1));
    if (!std::isfinite(b.alpha2)) throw CoefficientBoundsError("coefficients must be bounded");
    return b;
}

PeriodicField weight_field(const PeriodicField& lambda, const PeriodicField& mu) {
    require_same_grid(lambda.grid, mu.grid, "weight_field");
    return PeriodicField(mu.grid, mu.values.cwiseQuotient(lambda.values), FieldRole::nu);
}

}  // namespace nlh
