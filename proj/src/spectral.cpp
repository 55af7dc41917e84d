#include "nlh/spectral.hpp"

#include <complex>
#include <mutex>
#include <numbers>

#include <fftw3.h>

#include "nlh/errors.hpp"

namespace nlh {

namespace {
// FFTW planning is not thread-safe.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace

struct FourierTransform::Plans {
    fftw_complex* buffer = nullptr;
    fftw_plan fwd = nullptr;
    fftw_plan bwd = nullptr;

    Plans(int dim, int n, std::size_t size) {
        std::lock_guard lock(planner_mutex());
        buffer = fftw_alloc_complex(size);
        // FFTW wants row-major dims; our flat order has axis 0 fastest.
        int dims[kMaxDim];
        for (int c = 0; c < dim; ++c) dims[c] = n;
        fwd = fftw_plan_dft(dim, dims, buffer, buffer, FFTW_FORWARD, FFTW_ESTIMATE);
        bwd = fftw_plan_dft(dim, dims, buffer, buffer, FFTW_BACKWARD, FFTW_ESTIMATE);
        if (!buffer || !fwd || !bwd) throw Error("FFTW planning failed");
    }
    ~Plans() {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(fwd);
        fftw_destroy_plan(bwd);
        fftw_free(buffer);
    }
};

FourierTransform::FourierTransform(int dim, int n) : dim_(dim), n_(n) {
    size_ = 1;
    for (int c = 0; c < dim; ++c) size_ *= static_cast<std::size_t>(n);
    plans_ = std::make_unique<Plans>(dim, n, size_);
}

FourierTransform::~FourierTransform() = default;
FourierTransform::FourierTransform(FourierTransform&&) noexcept = default;
FourierTransform& FourierTransform::operator=(FourierTransform&&) noexcept = default;

Eigen::VectorXcd FourierTransform::forward(const Eigen::VectorXcd& values) const {
    auto* buf = reinterpret_cast<std::complex<double>*>(plans_->buffer);
    for (std::size_t i = 0; i < size_; ++i) buf[i] = values[static_cast<Eigen::Index>(i)];
    fftw_execute_dft(plans_->fwd, plans_->buffer, plans_->buffer);
    Eigen::VectorXcd out(static_cast<Eigen::Index>(size_));
    for (std::size_t i = 0; i < size_; ++i) out[static_cast<Eigen::Index>(i)] = buf[i];
    return out;
}

Eigen::VectorXcd FourierTransform::forward(const Eigen::VectorXd& values) const {
    return forward(Eigen::VectorXcd(values.cast<std::complex<double>>()));
}

Eigen::VectorXd FourierTransform::inverse_real(const Eigen::VectorXcd& coeffs) const {
    auto* buf = reinterpret_cast<std::complex<double>*>(plans_->buffer);
    for (std::size_t i = 0; i < size_; ++i) buf[i] = coeffs[static_cast<Eigen::Index>(i)];
    fftw_execute_dft(plans_->bwd, plans_->buffer, plans_->buffer);
    Eigen::VectorXd out(static_cast<Eigen::Index>(size_));
    const double inv = 1.0 / static_cast<double>(size_);
    for (std::size_t i = 0; i < size_; ++i) out[static_cast<Eigen::Index>(i)] = buf[i].real() * inv;
    return out;
}

std::vector<double> FourierTransform::wavenumbers(int n, double spacing) {
    std::vector<double> k(static_cast<std::size_t>(n));
    const double base = 2.0 * std::numbers::pi / (n * spacing);
    for (int m = 0; m < n; ++m) {
        int s = m;
        if (2 * m > n) s = m - n;
        if (2 * m == n) s = 0;  // Nyquist mode carries no odd derivative
        k[static_cast<std::size_t>(m)] = base * s;
    }
    return k;
}

Eigen::VectorXd circular_convolve(const TorusGrid& grid, const Eigen::VectorXd& kernel,
                                  const Eigen::VectorXd& values) {
    if (static_cast<std::size_t>(kernel.size()) != grid.size() ||
        static_cast<std::size_t>(values.size()) != grid.size())
        throw GridMismatchError("circular_convolve: size mismatch");
    const FourierTransform ft(grid.dim(), grid.n());
    Eigen::VectorXcd prod = ft.forward(kernel).cwiseProduct(ft.forward(values));
    return ft.inverse_real(prod) * grid.weight();
}

}  // namespace nlh
