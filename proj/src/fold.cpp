#include "nlh/fold.hpp"

#include <algorithm>

#include "nlh/errors.hpp"
#include "nlh/spectral.hpp"

namespace nlh {

namespace {

double shell_count(int dim, int j) {
    return std::pow(2.0 * j + 1.0, dim) - std::pow(2.0 * j - 1.0, dim);
}

// Bound on sum_{|k|_inf > shells} a(w + k) |w + k|^power over |w|_inf <= 1/2.
double dropped_shells_bound(const Kernel& kernel, int power, int shells) {
    const int d = kernel.dim();
    if (shells - 0.5 >= kernel.support_radius()) return 0.0;
    double total = 0.0;
    for (int j = shells + 1; j < shells + 100000; ++j) {
        const double a = kernel.tail_sup(j - 0.5);
        const double term = shell_count(d, j) * a * std::pow(std::sqrt(double(d)) * (j + 0.5), power);
        total += term;
        if (a == 0.0 || (term < 1e-18 * total && j > shells + 8)) break;
    }
    return total;
}

}  // namespace

std::pair<int, double> lattice_truncation(const Kernel& kernel, int power, double tail_tol,
                                          int shell_cap) {
    for (int k = 0; k <= shell_cap; ++k) {
        const double bound = dropped_shells_bound(kernel, power, k);
        if (bound < tail_tol) return {k, bound};
    }
    const double achieved = dropped_shells_bound(kernel, power, shell_cap);
    throw TruncationError("lattice fold: tail tolerance " + std::to_string(tail_tol) +
                              " unreachable within " + std::to_string(shell_cap) +
                              " shells (remainder bound " + std::to_string(achieved) + ")",
                          achieved);
}

FoldedKernel fold_kernel(const Kernel& kernel, const TorusGrid& grid, double tail_tol, int shell_cap) {
    if (kernel.dim() != grid.dim()) throw GridMismatchError("fold_kernel: kernel and grid dimension differ");
    const int d = grid.dim();

    int shells = 0;
    for (int p = 0; p <= 2; ++p) shells = std::max(shells, lattice_truncation(kernel, p, tail_tol, shell_cap).first);
    double bound = 0.0;
    for (int p = 0; p <= 2; ++p) bound = std::max(bound, dropped_shells_bound(kernel, p, shells));

    PeriodicField ahat(grid, 1, FieldRole::folded_kernel);
    PeriodicField bhat(grid, d, FieldRole::folded_kernel);
    PeriodicField chat(grid, d * d, FieldRole::folded_kernel);

    const int side = 2 * shells + 1;
    int cells = 1;
    for (int c = 0; c < d; ++c) cells *= side;

    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Point w = grid.centered_node(i);
        const auto row = static_cast<Eigen::Index>(i);
        double z[kMaxDim] = {0.0, 0.0, 0.0};
        for (int cell = 0; cell < cells; ++cell) {
            int rest = cell;
            for (int c = 0; c < d; ++c) {
                z[c] = w[c] + static_cast<double>(rest % side - shells);
                rest /= side;
            }
            const double a = kernel(std::span<const double>(z, d));
            if (a == 0.0) continue;
            ahat.values(row, 0) += a;
            for (int c = 0; c < d; ++c) {
                bhat.values(row, c) += a * z[c];
                for (int e = 0; e < d; ++e) chat.values(row, c * d + e) += a * z[c] * z[e];
            }
        }
    }

    // Pair each node with its reflection so evenness / oddness hold exactly.
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const std::size_t r = grid.reflected_index(i);
        if (r < i) continue;
        const auto a = static_cast<Eigen::Index>(i);
        const auto b = static_cast<Eigen::Index>(r);
        const double ae = 0.5 * (ahat.values(a, 0) + ahat.values(b, 0));
        ahat.values(a, 0) = ae;
        ahat.values(b, 0) = ae;
        for (int c = 0; c < d; ++c) {
            const double bo = 0.5 * (bhat.values(a, c) - bhat.values(b, c));
            bhat.values(a, c) = bo;
            bhat.values(b, c) = -bo;
        }
        for (int c = 0; c < d * d; ++c) {
            const double ce = 0.5 * (chat.values(a, c) + chat.values(b, c));
            chat.values(a, c) = ce;
            chat.values(b, c) = ce;
        }
    }

    return FoldedKernel{grid, std::move(ahat), std::move(bhat), std::move(chat), shells, bound, tail_tol};
}

PeriodicField fold_moment_kernel(const Kernel& kernel, const TorusGrid& grid, double tail_tol,
                                 int shell_cap) {
    return fold_kernel(kernel, grid, tail_tol, shell_cap).bhat;
}

PeriodicField mass_function(const FoldedKernel& folded, const PeriodicField& mu) {
    require_same_grid(folded.grid, mu.grid, "mass_function");
    PeriodicField q(mu.grid, 1, FieldRole::other);
    q.values.col(0) = circular_convolve(mu.grid, folded.ahat.values.col(0), mu.values.col(0));
    return q;
}

}  // namespace nlh
