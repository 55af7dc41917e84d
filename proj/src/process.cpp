#include "nlh/process.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <sstream>

#include "nlh/errors.hpp"
#include "nlh/parallel.hpp"

namespace nlh {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Rng path_rng(std::uint64_t seed, std::uint64_t index) {
    return Rng(splitmix64(seed + (index + 1) * 0x9e3779b97f4a7c15ULL));
}

// ---------------------------------------------------------------------------

JumpProcess::JumpProcess(ProcessConfig config) : config_(std::move(config)) {
    const int d = config_.kernel.dim();
    if (config_.lambda.dim() != d || config_.mu.dim() != d)
        throw ConfigError("process: kernel and coefficient dimensions differ");
    const double mu_lo = config_.mu.lower_bound();
    const double mu_hi = config_.mu.upper_bound();
    const double lam_lo = config_.lambda.lower_bound();
    if (!(mu_lo > 0.0) || !(lam_lo > 0.0))
        throw CoefficientBoundsError("process: lambda and mu must be bounded below by a positive constant");
    envelope_ = config_.envelope > 0.0 ? config_.envelope : mu_hi;
    if (envelope_ < mu_hi)
        throw ConfigError("process: rejection envelope is below the supremum of mu");
    accept_lb_ = mu_lo / envelope_;
    max_rate_ = config_.lambda.upper_bound() * config_.kernel.mass() * envelope_;
}

double JumpProcess::proposal_rate(const Point& x) const {
    return config_.lambda(x) * config_.kernel.mass() * envelope_;
}

bool JumpProcess::propose(Point& x, Rng& rng) const {
    const int d = dim();
    double z[kMaxDim];
    config_.kernel.sample(rng, std::span<double>(z, static_cast<std::size_t>(d)));
    Point y = x;
    for (int c = 0; c < d; ++c) y[c] -= z[c];
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (unit(rng) * envelope_ < config_.mu(y)) {
        x = y;
        return true;
    }
    return false;
}

Point JumpProcess::sample_jump(const Point& x, Rng& rng, int* proposals) const {
    Point y = x;
    int tries = 1;
    while (!propose(y, rng)) ++tries;
    if (proposals) *proposals = tries;
    return y;
}

// ---------------------------------------------------------------------------

Point Trajectory::position_at(double t) const {
    if (times.empty() || t < times.front()) throw Error("trajectory: time before the start of the path");
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    return positions[static_cast<std::size_t>(it - times.begin()) - 1];
}

Trajectory simulate_path(const JumpProcess& process, const Point& x0, double horizon, Rng& rng) {
    if (!(horizon >= 0.0)) throw ConfigError("simulate_path: horizon must be nonnegative");
    Trajectory path;
    path.dim = process.dim();
    path.times.push_back(0.0);
    path.positions.push_back(x0);
    Point x = x0;
    double t = 0.0;
    for (;;) {
        std::exponential_distribution<double> hold(process.proposal_rate(x));
        t += hold(rng);
        if (t > horizon) break;
        if (process.propose(x, rng)) {
            if (t > path.times.back()) {
                path.times.push_back(t);
                path.positions.push_back(x);
            } else {
                path.positions.back() = x;  // coincident event times
            }
        }
    }
    return path;
}

namespace {

// Runs one path in base time, recording positions at the base observation times.
std::uint64_t observe_path(const JumpProcess& process, const std::vector<double>& base_times, double base_horizon,
                           Rng& rng, std::vector<Point>& observed, Trajectory* keep) {
    Point x{};
    double t = 0.0;
    std::size_t next = 0;
    std::uint64_t jumps = 0;
    if (keep) {
        keep->dim = process.dim();
        keep->times.assign(1, 0.0);
        keep->positions.assign(1, x);
    }
    for (;;) {
        std::exponential_distribution<double> hold(process.proposal_rate(x));
        const double t_next = t + hold(rng);
        while (next < base_times.size() && base_times[next] < t_next) observed[next++] = x;
        if (t_next > base_horizon) break;
        t = t_next;
        if (process.propose(x, rng)) {
            ++jumps;
            if (keep) {
                keep->times.push_back(t);
                keep->positions.push_back(x);
            }
        }
    }
    while (next < base_times.size()) observed[next++] = x;
    return jumps;
}

}  // namespace

double expected_proposals(const JumpProcess& process, const EnsembleOptions& options) {
    return static_cast<double>(options.paths) *
           (1.0 + process.max_proposal_rate() * options.horizon / (options.eps * options.eps));
}

TrajectoryBatch rescaled_ensemble(const JumpProcess& process, const EnsembleOptions& options) {
    if (options.paths < 2) throw ConfigError("ensemble: at least 2 paths are required");
    if (!(options.eps > 0.0)) throw ConfigError("ensemble: eps must be positive");
    if (!(options.horizon >= 0.0)) throw ConfigError("ensemble: horizon must be nonnegative");
    if (options.times.empty()) throw ConfigError("ensemble: at least one evaluation time is required");
    for (std::size_t k = 0; k < options.times.size(); ++k) {
        if (!(options.times[k] > 0.0) || options.times[k] > options.horizon)
            throw ConfigError("ensemble: evaluation times must lie in (0, horizon]");
        if (k > 0 && !(options.times[k] > options.times[k - 1]))
            throw ConfigError("ensemble: evaluation times must be strictly increasing");
    }
    const double cost = expected_proposals(process, options);
    if (cost > options.proposal_budget) {
        std::ostringstream msg;
        msg << "ensemble needs about " << cost << " jump proposals (N=" << options.paths
            << ", horizon/eps^2=" << options.horizon / (options.eps * options.eps) << "); budget is "
            << options.proposal_budget;
        throw BudgetError(msg.str(), cost);
    }

    const int d = process.dim();
    const double eps2 = options.eps * options.eps;
    std::vector<double> base_times;
    for (double t : options.times) base_times.push_back(t / eps2);
    const double base_horizon = options.horizon / eps2;

    TrajectoryBatch batch;
    batch.eps = options.eps;
    batch.horizon = options.horizon;
    batch.dim = d;
    batch.times = options.times;
    batch.expected_proposals = cost;
    batch.positions.assign(options.times.size(), Eigen::MatrixXd(static_cast<Eigen::Index>(options.paths), d));
    batch.jump_counts.assign(options.paths, 0);
    const std::size_t kept = std::min(options.keep_paths, options.paths);
    batch.kept.resize(kept);

    constexpr std::size_t block = 256;
    const std::size_t blocks = (options.paths + block - 1) / block;
    parallel_for(blocks, options.threads, [&](std::size_t b) {
        std::vector<Point> observed(base_times.size());
        const std::size_t end = std::min(options.paths, (b + 1) * block);
        for (std::size_t p = b * block; p < end; ++p) {
            Rng rng = path_rng(options.seed, p);
            Trajectory* keep = p < kept ? &batch.kept[p] : nullptr;
            batch.jump_counts[p] = observe_path(process, base_times, base_horizon, rng, observed, keep);
            for (std::size_t k = 0; k < observed.size(); ++k)
                for (int c = 0; c < d; ++c)
                    batch.positions[k](static_cast<Eigen::Index>(p), c) = options.eps * observed[k][c];
            if (keep) {
                for (double& t : keep->times) t *= eps2;
                for (Point& x : keep->positions)
                    for (int c = 0; c < d; ++c) x[c] *= options.eps;
            }
        }
    });
    return batch;
}

// ---------------------------------------------------------------------------

Eigen::VectorXd corrector_mean_offset(const PeriodicField& kappa1, const PeriodicField& nu, const Point& x0,
                                      double eps) {
    require_same_grid(kappa1.grid, nu.grid, "corrector_mean_offset");
    const int d = kappa1.components();
    const Eigen::VectorXd w = nu.values.col(0);
    Eigen::VectorXd out(d);
    for (int c = 0; c < d; ++c)
        out[c] = eps * (interpolate_periodic(kappa1, c, x0) - w.dot(kappa1.values.col(c)) / w.sum());
    return out;
}

EnsembleStats invariance_stats(const TrajectoryBatch& batch, const Eigen::MatrixXd& theta,
                               const std::optional<Eigen::VectorXd>& mean_offset) {
    const int d = batch.dim;
    if (theta.rows() != d || theta.cols() != d) throw ConfigError("invariance_stats: Theta dimension mismatch");
    const std::size_t n = batch.paths();
    if (n < 2) throw ConfigError("invariance_stats: need at least two paths");
    const double nd = static_cast<double>(n);

    EnsembleStats out;
    out.eps = batch.eps;
    out.paths = n;
    double jumps = 0.0;
    for (auto j : batch.jump_counts) jumps += static_cast<double>(j);
    out.mean_jumps = jumps / nd;

    if (mean_offset && mean_offset->size() != d) throw ConfigError("invariance_stats: mean offset dimension mismatch");
    const Eigen::MatrixXd theta_sym = 0.5 * (theta + theta.transpose());
    bool mean_ok = true, cov_ok = true, psd_ok = true;
    double worst_mean = 0.0, worst_z = 0.0;
    for (std::size_t k = 0; k < batch.times.size(); ++k) {
        const Eigen::MatrixXd& x = batch.positions[k];
        TimeStats ts;
        ts.t = batch.times[k];
        ts.mean = x.colwise().mean().transpose();
        const Eigen::MatrixXd centered = x.rowwise() - ts.mean.transpose();
        ts.cov = (centered.transpose() * centered) / (nd - 1.0);
        ts.excess_kurtosis.resize(d);
        for (int c = 0; c < d; ++c) {
            const Eigen::ArrayXd sq = centered.col(c).array().square();
            const double m2 = sq.mean();
            const double m4 = sq.square().mean();
            ts.excess_kurtosis[c] = m2 > 0.0 ? m4 / (m2 * m2) - 3.0 : 0.0;
        }
        ts.target_cov = 2.0 * theta_sym * ts.t;
        ts.mean_offset = mean_offset ? *mean_offset : Eigen::VectorXd::Zero(d);
        ts.raw_mean_norm = ts.mean.norm();
        ts.mean_norm = (ts.mean - ts.mean_offset).norm();
        ts.mean_bound = 3.0 * std::sqrt(ts.target_cov.trace() / nd);
        ts.cov_se.resize(d, d);
        ts.cov_z.resize(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                const double s = ts.target_cov(i, i) * ts.target_cov(j, j) + ts.target_cov(i, j) * ts.target_cov(i, j);
                ts.cov_se(i, j) = std::sqrt(s / nd);
                ts.cov_z(i, j) = ts.cov_se(i, j) > 0.0 ? (ts.cov(i, j) - ts.target_cov(i, j)) / ts.cov_se(i, j)
                                                        : std::numeric_limits<double>::infinity();
                worst_z = std::max(worst_z, std::abs(ts.cov_z(i, j)));
                if (!(std::abs(ts.cov_z(i, j)) <= 3.0)) cov_ok = false;
            }
        if (!(ts.mean_norm <= ts.mean_bound)) mean_ok = false;
        worst_mean = std::max(worst_mean, ts.mean_bound > 0.0 ? ts.mean_norm / ts.mean_bound : 0.0);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(ts.cov);
        if (eig.eigenvalues().minCoeff() < -1e-12 * ts.cov.norm()) psd_ok = false;
        out.times.push_back(std::move(ts));
    }

    // Increments over [t_{k-1}, t_k] and [t_k, t_{k+1}], t_{-1} = 0.
    const std::size_t pairs = batch.times.size() >= 2 ? batch.times.size() - 1 : 0;
    out.increment_corr.resize(static_cast<Eigen::Index>(pairs), d);
    out.increment_corr_bound = 3.0 / std::sqrt(nd);
    bool corr_ok = true;
    for (std::size_t k = 0; k < pairs; ++k) {
        const Eigen::MatrixXd first =
            k == 0 ? batch.positions[0] : Eigen::MatrixXd(batch.positions[k] - batch.positions[k - 1]);
        const Eigen::MatrixXd second = batch.positions[k + 1] - batch.positions[k];
        for (int c = 0; c < d; ++c) {
            const Eigen::ArrayXd a = first.col(c).array() - first.col(c).mean();
            const Eigen::ArrayXd b = second.col(c).array() - second.col(c).mean();
            const double denom = std::sqrt((a * a).sum() * (b * b).sum());
            const double r = denom > 0.0 ? (a * b).sum() / denom : 0.0;
            out.increment_corr(static_cast<Eigen::Index>(k), c) = r;
            if (!(std::abs(r) <= out.increment_corr_bound)) corr_ok = false;
        }
    }

    std::ostringstream m, c, p, r;
    m << "max ||mean" << (mean_offset ? " - corrector offset" : "") << "|| / (3 sqrt(tr(2 Theta t)/N)) = "
      << worst_mean;
    c << "max |z| of cov - 2 Theta t = " << worst_z << " (band 3 se)";
    p << "empirical covariances are positive semidefinite";
    r << "increment correlations within " << out.increment_corr_bound;
    out.verdicts.push_back({"mean_zero", mean_ok, m.str()});
    out.verdicts.push_back({"covariance", cov_ok, c.str()});
    out.verdicts.push_back({"covariance_psd", psd_ok, p.str()});
    if (pairs > 0) out.verdicts.push_back({"independent_increments", corr_ok, r.str()});
    return out;
}

StudyVerdict kurtosis_trend(const std::vector<EnsembleStats>& stats) {
    StudyVerdict v{"kurtosis_decreasing", true, ""};
    std::ostringstream detail;
    detail << "excess kurtosis by eps:";
    for (std::size_t s = 0; s < stats.size(); ++s) {
        const Eigen::VectorXd& k = stats[s].times.back().excess_kurtosis;
        detail << " [" << stats[s].eps << ": ";
        for (int c = 0; c < k.size(); ++c) detail << (c ? ", " : "") << k[c];
        detail << "]";
        if (s > 0) {
            if (!(stats[s].eps < stats[s - 1].eps)) v.pass = false;
            const Eigen::VectorXd& prev = stats[s - 1].times.back().excess_kurtosis;
            for (int c = 0; c < k.size(); ++c)
                if (!(k[c] < prev[c])) v.pass = false;
        }
    }
    if (stats.size() < 2) detail << " (needs at least two eps values)";
    v.detail = detail.str();
    return v;
}

}  // namespace nlh
