#include "nlh/grid.hpp"

#include <cmath>
#include <string>

#include "nlh/errors.hpp"

namespace nlh {

TorusGrid::TorusGrid(int dim, int n) : dim_(dim), n_(n) {
    if (dim < 1 || dim > kMaxDim) throw Error("TorusGrid: dimension must be 1.." + std::to_string(kMaxDim));
    if (n < 4) throw ResolutionError("TorusGrid: need at least 4 points per dimension");
    size_ = 1;
    for (int c = 0; c < dim; ++c) size_ *= static_cast<std::size_t>(n);
    weight_ = std::pow(1.0 / n, dim);
}

MultiIndex TorusGrid::multi_index(std::size_t flat) const {
    MultiIndex idx{};
    for (int c = 0; c < dim_; ++c) {
        idx[c] = static_cast<int>(flat % n_);
        flat /= n_;
    }
    return idx;
}

std::size_t TorusGrid::flat_index(const MultiIndex& idx) const {
    std::size_t flat = 0;
    for (int c = dim_ - 1; c >= 0; --c) {
        int i = idx[c] % n_;
        if (i < 0) i += n_;
        flat = flat * n_ + static_cast<std::size_t>(i);
    }
    return flat;
}

Point TorusGrid::node(std::size_t flat) const {
    const MultiIndex idx = multi_index(flat);
    Point x{};
    for (int c = 0; c < dim_; ++c) x[c] = static_cast<double>(idx[c]) / n_;
    return x;
}

Point TorusGrid::centered_node(std::size_t flat) const {
    const MultiIndex idx = multi_index(flat);
    Point x{};
    for (int c = 0; c < dim_; ++c) {
        const int i = 2 * idx[c] >= n_ ? idx[c] - n_ : idx[c];
        x[c] = static_cast<double>(i) / n_;
    }
    return x;
}

std::size_t TorusGrid::difference_index(std::size_t i, std::size_t j) const {
    const MultiIndex a = multi_index(i);
    const MultiIndex b = multi_index(j);
    MultiIndex d{};
    for (int c = 0; c < dim_; ++c) d[c] = a[c] - b[c];
    return flat_index(d);
}

std::size_t TorusGrid::reflected_index(std::size_t i) const {
    MultiIndex a = multi_index(i);
    for (int c = 0; c < dim_; ++c) a[c] = -a[c];
    return flat_index(a);
}

std::string_view to_string(FieldRole role) {
    switch (role) {
        case FieldRole::lambda: return "lambda";
        case FieldRole::mu: return "mu";
        case FieldRole::nu: return "nu";
        case FieldRole::corrector1: return "corrector1";
        case FieldRole::corrector2: return "corrector2";
        case FieldRole::folded_kernel: return "folded_kernel";
        case FieldRole::other: return "other";
    }
    return "other";
}

PeriodicField::PeriodicField(TorusGrid g, int components, FieldRole r)
    : grid(g), values(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(g.size()), components)), role(r) {}

PeriodicField::PeriodicField(TorusGrid g, Eigen::MatrixXd v, FieldRole r)
    : grid(g), values(std::move(v)), role(r) {
    if (static_cast<std::size_t>(values.rows()) != grid.size())
        throw GridMismatchError("PeriodicField: value rows do not match grid size");
}

double PeriodicField::mean(int c) const { return values.col(c).mean(); }

double PeriodicField::integral(int c) const { return values.col(c).sum() * grid.weight(); }

void require_same_grid(const TorusGrid& a, const TorusGrid& b, std::string_view context) {
    if (!(a == b)) throw GridMismatchError(std::string(context) + ": fields live on different grids");
}

double interpolate_periodic(const PeriodicField& field, int component, const Point& x) {
    const TorusGrid& g = field.grid;
    const int n = g.n();
    MultiIndex base{};
    Point frac{};
    for (int c = 0; c < g.dim(); ++c) {
        double s = x[c] - std::floor(x[c]);
        s *= n;
        double fl = std::floor(s);
        base[c] = static_cast<int>(fl) % n;
        frac[c] = s - fl;
    }
    double acc = 0.0;
    const int corners = 1 << g.dim();
    for (int mask = 0; mask < corners; ++mask) {
        double w = 1.0;
        MultiIndex idx = base;
        for (int c = 0; c < g.dim(); ++c) {
            if (mask & (1 << c)) {
                w *= frac[c];
                idx[c] += 1;
            } else {
                w *= 1.0 - frac[c];
            }
        }
        if (w != 0.0) acc += w * field.values(static_cast<Eigen::Index>(g.flat_index(idx)), component);
    }
    return acc;
}

}  // namespace nlh
