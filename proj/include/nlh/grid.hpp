#pragma once

#include <array>
#include <cstddef>
#include <string_view>

#include <Eigen/Dense>

namespace nlh {

inline constexpr int kMaxDim = 3;
using Point = std::array<double, kMaxDim>;
using MultiIndex = std::array<int, kMaxDim>;

/// Uniform tensor grid on the unit torus [0,1)^d with nodes k/n.
///
/// Flat node index runs fastest in the first coordinate:
/// flat = i_0 + n * i_1 + n^2 * i_2.
class TorusGrid {
public:
    TorusGrid(int dim, int n);

    int dim() const noexcept { return dim_; }
    int n() const noexcept { return n_; }
    std::size_t size() const noexcept { return size_; }
    double spacing() const noexcept { return 1.0 / n_; }
    /// Quadrature weight h^d of a single node.
    double weight() const noexcept { return weight_; }

    MultiIndex multi_index(std::size_t flat) const;
    std::size_t flat_index(const MultiIndex& idx) const;  // wraps periodically
    Point node(std::size_t flat) const;
    /// Node coordinates wrapped to [-1/2, 1/2)^d.
    Point centered_node(std::size_t flat) const;
    /// Flat index of the node xi_i - xi_j (mod 1).
    std::size_t difference_index(std::size_t i, std::size_t j) const;
    /// Flat index of -xi_i (mod 1).
    std::size_t reflected_index(std::size_t i) const;

    bool operator==(const TorusGrid&) const = default;

private:
    int dim_;
    int n_;
    std::size_t size_;
    double weight_;
};

enum class FieldRole { lambda, mu, nu, corrector1, corrector2, folded_kernel, other };

std::string_view to_string(FieldRole role);

/// Real field on a torus grid; rows are nodes, columns are components.
struct PeriodicField {
    TorusGrid grid;
    Eigen::MatrixXd values;
    FieldRole role = FieldRole::other;

    PeriodicField(TorusGrid g, int components, FieldRole r = FieldRole::other);
    PeriodicField(TorusGrid g, Eigen::MatrixXd v, FieldRole r = FieldRole::other);

    int components() const { return static_cast<int>(values.cols()); }
    Eigen::VectorXd component(int c) const { return values.col(c); }
    /// Grid quadrature mean of one component.
    double mean(int c = 0) const;
    /// Quadrature integral h^d * sum of one component.
    double integral(int c = 0) const;
};

void require_same_grid(const TorusGrid& a, const TorusGrid& b, std::string_view context);

/// Periodic (multi)linear interpolation of one component at an arbitrary point.
double interpolate_periodic(const PeriodicField& field, int component, const Point& x);

}  // namespace nlh
