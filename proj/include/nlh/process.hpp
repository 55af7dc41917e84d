#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "nlh/coefficients.hpp"
#include "nlh/grid.hpp"
#include "nlh/kernel.hpp"
#include "nlh/verdict.hpp"

namespace nlh {

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
std::uint64_t splitmix64(std::uint64_t x);

/// Independent stream for path `index`: mt19937_64 seeded with
/// splitmix64(seed + (index + 1) * 0x9e3779b97f4a7c15).
Rng path_rng(std::uint64_t seed, std::uint64_t index);

struct ProcessConfig {
    Kernel kernel;
    CoefficientSpec lambda;
    CoefficientSpec mu;
    /// Rejection envelope for mu; 0 selects mu.upper_bound().
    double envelope = 0.0;
};

/// Jump process with generator L u(x) = lambda(x) int a(x - y) mu(y) (u(y) - u(x)) dy.
///
/// Proposals y = x - z, z ~ a / a_1, arrive at rate lambda(x) a_1 alpha and are
/// accepted with probability mu(y) / alpha. Accepted jumps therefore occur at
/// rate lambda(x) q(x) with destination law a(x - y) mu(y) / q(x).
class JumpProcess {
public:
    explicit JumpProcess(ProcessConfig config);

    int dim() const noexcept { return config_.kernel.dim(); }
    const ProcessConfig& config() const noexcept { return config_; }
    double envelope() const noexcept { return envelope_; }
    /// Lower bound of the acceptance probability, inf mu / alpha.
    double acceptance_lower_bound() const noexcept { return accept_lb_; }
    /// Proposal rate lambda(x) a_1 alpha.
    double proposal_rate(const Point& x) const;
    /// Upper bound of the proposal rate over all x.
    double max_proposal_rate() const noexcept { return max_rate_; }

    /// One draw from p(x, .); `proposals` (if given) receives the number of tries.
    Point sample_jump(const Point& x, Rng& rng, int* proposals = nullptr) const;

    /// One proposal: returns true and updates x when accepted.
    bool propose(Point& x, Rng& rng) const;

private:
    ProcessConfig config_;
    double envelope_ = 0.0;
    double accept_lb_ = 0.0;
    double max_rate_ = 0.0;
};

/// Right-continuous step path: position_at(t) is the position after the last
/// jump at time <= t.
struct Trajectory {
    int dim = 1;
    std::vector<double> times;     // t_0 = 0 < t_1 < ...
    std::vector<Point> positions;  // x_k held on [t_k, t_{k+1})

    Point position_at(double t) const;
    std::size_t jumps() const { return times.empty() ? 0 : times.size() - 1; }
};

Trajectory simulate_path(const JumpProcess& process, const Point& x0, double horizon, Rng& rng);

struct EnsembleOptions {
    double eps = 1.0;
    double horizon = 1.0;             // in rescaled time
    std::vector<double> times{1.0};   // rescaled evaluation times, increasing, <= horizon
    std::size_t paths = 100000;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    double proposal_budget = 2e9;     // cap on expected proposals over the batch
    std::size_t keep_paths = 0;       // full rescaled trajectories retained for output
};

/// X_eps(t) = eps X(t / eps^2), X(0) = 0, sampled at the evaluation times.
struct TrajectoryBatch {
    double eps = 1.0;
    double horizon = 1.0;
    int dim = 1;
    std::vector<double> times;
    std::vector<Eigen::MatrixXd> positions;  // per time: paths x dim
    std::vector<std::uint64_t> jump_counts;  // accepted jumps over the horizon per path
    std::vector<Trajectory> kept;            // rescaled, first keep_paths paths
    double expected_proposals = 0.0;

    std::size_t paths() const { return jump_counts.size(); }
};

/// Throws BudgetError when the expected number of proposals exceeds the budget
/// and ConfigError on invalid options.
TrajectoryBatch rescaled_ensemble(const JumpProcess& process, const EnsembleOptions& options);

/// Expected proposal count of an ensemble run.
double expected_proposals(const JumpProcess& process, const EnsembleOptions& options);

struct TimeStats {
    double t = 0.0;
    Eigen::VectorXd mean;
    Eigen::VectorXd mean_offset;  // subtracted before the mean check (zero if none)
    Eigen::MatrixXd cov;
    Eigen::VectorXd excess_kurtosis;
    Eigen::MatrixXd target_cov;  // 2 Theta t
    double mean_norm = 0.0;
    double mean_bound = 0.0;     // 3 sqrt(tr(2 Theta t) / N)
    double raw_mean_norm = 0.0;  // ||mean|| without the offset
    Eigen::MatrixXd cov_se;
    Eigen::MatrixXd cov_z;
};

struct EnsembleStats {
    double eps = 1.0;
    std::size_t paths = 0;
    double mean_jumps = 0.0;
    std::vector<TimeStats> times;
    /// Per component correlation of increments over consecutive intervals
    /// [t_{k-1}, t_k], [t_k, t_{k+1}] (t_{-1} = 0); rows are interval pairs.
    Eigen::MatrixXd increment_corr;
    double increment_corr_bound = 0.0;  // 3 / sqrt(N)
    std::vector<StudyVerdict> verdicts;

    bool pass() const { return all_pass(verdicts); }
};

/// Deterministic O(eps) mean of X_eps(t) for t / eps^2 beyond the mixing time.
///
/// X + kappa1(X) is a martingale of the base process, so
/// E X(s) -> kappa1(x0) - <kappa1>_nu with nu = mu / lambda the invariant weight.
Eigen::VectorXd corrector_mean_offset(const PeriodicField& kappa1, const PeriodicField& nu, const Point& x0,
                                      double eps);

/// Empirical moments against the limit covariance 2 Theta t with 3-standard-error
/// bands. The mean check is applied to mean - mean_offset when an offset is given.
EnsembleStats invariance_stats(const TrajectoryBatch& batch, const Eigen::MatrixXd& theta,
                               const std::optional<Eigen::VectorXd>& mean_offset = std::nullopt);

/// Componentwise excess kurtosis at the last evaluation time must decrease
/// strictly along the list (ordered by decreasing eps).
StudyVerdict kurtosis_trend(const std::vector<EnsembleStats>& stats);

}  // namespace nlh
