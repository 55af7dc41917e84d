#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "nlh/grid.hpp"

namespace nlh {

/// Complex DFT over a cubic array of n^dim points in TorusGrid flat order.
/// Backed by FFTW; plans are created once per instance.
class FourierTransform {
public:
    FourierTransform(int dim, int n);
    ~FourierTransform();
    FourierTransform(FourierTransform&&) noexcept;
    FourierTransform& operator=(FourierTransform&&) noexcept;

    int dim() const noexcept { return dim_; }
    int n() const noexcept { return n_; }
    std::size_t size() const noexcept { return size_; }

    Eigen::VectorXcd forward(const Eigen::VectorXd& values) const;
    Eigen::VectorXcd forward(const Eigen::VectorXcd& values) const;
    /// Normalized inverse (divides by n^dim); returns the real part.
    Eigen::VectorXd inverse_real(const Eigen::VectorXcd& coeffs) const;

    /// Angular wavenumbers 2 pi m / (n spacing) in FFT order.
    static std::vector<double> wavenumbers(int n, double spacing);

private:
    struct Plans;
    int dim_;
    int n_;
    std::size_t size_;
    std::unique_ptr<Plans> plans_;
};

/// (k * f)(xi_i) = h^d sum_j k(xi_i - xi_j) f(xi_j) on the torus.
Eigen::VectorXd circular_convolve(const TorusGrid& grid, const Eigen::VectorXd& kernel,
                                  const Eigen::VectorXd& values);

}  // namespace nlh
