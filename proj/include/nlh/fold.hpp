#pragma once

#include "nlh/grid.hpp"
#include "nlh/kernel.hpp"

namespace nlh {

inline constexpr double kDefaultTailTol = 1e-10;
inline constexpr int kDefaultShellCap = 64;

/// Lattice periodization of the kernel and its first two moment weights:
///
///   ahat(w) = sum_k a(w + k)
///   bhat(w) = sum_k a(w + k) (w + k)
///   chat(w) = sum_k a(w + k) (w + k) (x) (w + k)      (d*d components, row major)
///
/// Shells |k|_inf <= k_max are summed; `tail_bound` bounds the dropped part.
struct FoldedKernel {
    TorusGrid grid;
    PeriodicField ahat;
    PeriodicField bhat;
    PeriodicField chat;
    int k_max = 0;
    double tail_bound = 0.0;
    double tail_tol = kDefaultTailTol;
};

/// Throws TruncationError when `tail_tol` needs more than `shell_cap` shells.
FoldedKernel fold_kernel(const Kernel& kernel, const TorusGrid& grid,
                         double tail_tol = kDefaultTailTol, int shell_cap = kDefaultShellCap);

/// The vector fold bhat alone.
PeriodicField fold_moment_kernel(const Kernel& kernel, const TorusGrid& grid,
                                 double tail_tol = kDefaultTailTol,
                                 int shell_cap = kDefaultShellCap);

/// Shells needed so the dropped lattice sum of a |z|^power stays below tol,
/// together with the bound achieved. Throws TruncationError past `shell_cap`.
std::pair<int, double> lattice_truncation(const Kernel& kernel, int power, double tail_tol,
                                          int shell_cap = kDefaultShellCap);

/// q(xi) = int_T ahat(xi - eta) mu(eta) d eta by circular convolution.
PeriodicField mass_function(const FoldedKernel& folded, const PeriodicField& mu);

}  // namespace nlh
