#include "nlh/driver.hpp"

#include <chrono>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "nlh/config.hpp"
#include "nlh/errors.hpp"
#include "nlh/process.hpp"
#include "nlh/report.hpp"

namespace nlh {

namespace fs = std::filesystem;

namespace {

class RunLog {
public:
    explicit RunLog(const fs::path& path) : out_(path), start_(std::chrono::steady_clock::now()) {}

    void line(const std::string& stage, const std::string& msg) {
        const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        char stamp[32];
        std::snprintf(stamp, sizeof stamp, "%9.3f", t);
        out_ << '[' << stamp << "s] " << stage << ": " << msg << '\n';
        out_.flush();
    }

private:
    std::ofstream out_;
    std::chrono::steady_clock::time_point start_;
};

struct Context {
    const RunConfig& config;
    std::string hash;
    fs::path dir;
    unsigned threads;
    RunLog& log;
    Json& summary;
    std::vector<std::pair<std::string, StudyVerdict>> verdicts;
    std::optional<CellSolution> cell;

    void add(const std::string& stage, const std::vector<StudyVerdict>& vs) {
        for (const auto& v : vs) {
            verdicts.emplace_back(stage, v);
            log.line(stage, std::string(v.pass ? "PASS " : "FAIL ") + v.name + " (" + v.detail + ")");
        }
    }

    void csv(const std::string& name, CsvTable table) {
        if (!config.output.csv) return;
        table.comments.insert(table.comments.begin(), "config_hash " + hash);
        write_csv(dir / name, table);
    }

    void svg(const std::string& name, const Plot& plot) {
        if (!config.output.svg) return;
        std::string text = render_svg(plot);
        text.insert(text.find('\n') + 1, "<!-- config_hash " + hash + " -->\n");
        std::ofstream(dir / name, std::ios::binary) << text;
    }
};

const CellSolution& cell_stage(Context& ctx) {
    if (ctx.cell) return *ctx.cell;
    ctx.log.line("theta", "solving cell problems on the " + std::to_string(ctx.config.cell.n) + "^" +
                              std::to_string(ctx.config.dim) + " grid");
    ctx.cell = solve_cell_problem(make_cell_problem(ctx.config));
    const CellSolution& cell = *ctx.cell;
    ctx.summary["stages"]["theta"] = cell_json(cell);
    if (!cell.diagnostics.warning.empty()) ctx.log.line("theta", "warning: " + cell.diagnostics.warning);

    std::vector<StudyVerdict> vs;
    std::ostringstream pd, dr;
    pd << "min eigenvalue of sym(Theta) = " << cell.diagnostics.pd_margin;
    vs.push_back({"theta_positive_definite", cell.diagnostics.pd_margin > 0.0, pd.str()});
    dr << "||sym Theta - Theta_I|| / ||Theta|| = " << cell.diagnostics.dirichlet_rel_diff << " (required < "
       << ctx.config.cell.dirichlet_rel_tol << ")";
    vs.push_back({"theta_dirichlet_agreement", cell.diagnostics.dirichlet_rel_diff < ctx.config.cell.dirichlet_rel_tol,
                  dr.str()});
    ctx.add("theta", vs);

    const int d = ctx.config.dim;
    CsvTable t;
    t.comments.push_back("effective matrix Theta and the symmetric part from the Dirichlet form");
    t.columns = {"i", "j", "theta", "theta_dirichlet"};
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            t.rows.push_back({static_cast<double>(i), static_cast<double>(j), cell.theta(i, j), cell.theta_dirichlet(i, j)});
    ctx.csv("theta.csv", t);
    return cell;
}

void corrector_stage(Context& ctx) {
    const CellSolution& cell = cell_stage(ctx);
    const int d = ctx.config.dim;
    std::vector<std::string> n1, n2;
    for (int i = 0; i < d; ++i) {
        n1.push_back("kappa1_" + std::to_string(i + 1));
        for (int j = 0; j < d; ++j) n2.push_back("kappa2_" + std::to_string(i + 1) + std::to_string(j + 1));
    }
    ctx.csv("kappa1.csv", field_table(cell.kappa1, n1));
    ctx.csv("kappa2.csv", field_table(cell.kappa2, n2));
    ctx.summary["stages"]["correctors"] = Json{{"kappa1_sup", cell.kappa1.values.cwiseAbs().maxCoeff()},
                                               {"kappa2_sup", cell.kappa2.values.cwiseAbs().maxCoeff()},
                                               {"kappa1_residual", vector_json(cell.diagnostics.solve1.residual)},
                                               {"kappa2_residual", vector_json(cell.diagnostics.solve2.residual)}};
    std::ostringstream r;
    const double worst = std::max(cell.diagnostics.solve1.residual.maxCoeff(), cell.diagnostics.solve2.residual.maxCoeff());
    r << "max backward error " << worst << " (required < " << ctx.config.cell.residual_rel_tol * 1e3 << ")";
    ctx.add("correctors", {{"corrector_residuals", worst < ctx.config.cell.residual_rel_tol * 1e3, r.str()}});
}

void resolvent_stage(Context& ctx) {
    const CellSolution& cell = cell_stage(ctx);
    StudyOptions opts;
    opts.threads = ctx.threads;
    opts.final_ratio_max = ctx.config.resolvent.final_ratio_max;
    opts.step_ratio_max = ctx.config.resolvent.step_ratio_max;
    ctx.log.line("resolvent-study", "running " + std::to_string(ctx.config.resolvent.eps.size()) + " eps values");
    const ResolventStudy study =
        resolvent_convergence_study(make_resolvent_problem(ctx.config), cell, ctx.config.resolvent.eps, opts);
    for (const auto& p : study.points) {
        std::ostringstream s;
        s << "eps=" << p.eps << " points=" << p.points << " error=" << p.error_l2 << " phi=" << p.phi_norm
          << " runtime=" << p.runtime_s << "s";
        ctx.log.line("resolvent-study", s.str());
    }
    ctx.summary["stages"]["resolvent_study"] = resolvent_json(study);
    ctx.add("resolvent-study", study.verdicts);
    ctx.csv("resolvent.csv", resolvent_table(study));
    ctx.svg("resolvent.svg", resolvent_plot(study));
}

void semigroup_stage(Context& ctx) {
    const CellSolution& cell = cell_stage(ctx);
    const SemigroupConfig& sc = ctx.config.semigroup;
    SemigroupOptions opts{sc.horizon, sc.dt, sc.mass_tol, ctx.threads};
    ctx.log.line("semigroup-study", "running " + std::to_string(sc.eps.size()) + " eps values");
    const SemigroupStudy study = semigroup_study(make_semigroup_problem(ctx.config), cell.theta, sc.eps, opts);
    for (const auto& p : study.points) {
        std::ostringstream s;
        s << "eps=" << p.eps << " points=" << p.points << " sup_error=" << p.sup_error_l2
          << " mass_drift=" << p.mass_drift << " runtime=" << p.runtime_s << "s";
        ctx.log.line("semigroup-study", s.str());
    }
    ctx.summary["stages"]["semigroup_study"] = semigroup_json(study);
    ctx.add("semigroup-study", study.verdicts);
    ctx.csv("semigroup.csv", semigroup_table(study));
    ctx.csv("semigroup_by_time.csv", semigroup_time_table(study));
    ctx.svg("semigroup.svg", semigroup_plot(study));
}

void simulate_stage(Context& ctx) {
    const CellSolution& cell = cell_stage(ctx);
    const SimulateConfig& sc = ctx.config.simulate;
    const JumpProcess process(ProcessConfig{make_kernel(ctx.config),
                                            make_coefficient(ctx.config.lambda, ctx.config.dim, ctx.config.base_dir),
                                            make_coefficient(ctx.config.mu, ctx.config.dim, ctx.config.base_dir),
                                            sc.envelope});

    auto run_batch = [&](double eps, std::size_t keep) {
        EnsembleOptions o;
        o.eps = eps;
        o.horizon = sc.horizon;
        o.times = sc.times;
        o.paths = static_cast<std::size_t>(sc.paths);
        o.seed = ctx.config.seed;
        o.threads = ctx.threads;
        o.proposal_budget = sc.proposal_budget;
        o.keep_paths = keep;
        std::ostringstream s;
        s << "eps=" << eps << " N=" << o.paths << " expected proposals " << expected_proposals(process, o);
        ctx.log.line("simulate", s.str());
        return rescaled_ensemble(process, o);
    };

    const TrajectoryBatch main = run_batch(sc.eps, static_cast<std::size_t>(sc.keep_paths));
    const Eigen::VectorXd offset =
        corrector_mean_offset(cell.kappa1, weight_field(cell.lambda, cell.mu), Point{}, sc.eps);
    const EnsembleStats main_stats = invariance_stats(main, cell.theta, offset);
    std::vector<EnsembleStats> trend;
    for (double e : sc.kurtosis_eps)
        trend.push_back(e == sc.eps ? main_stats : invariance_stats(run_batch(e, 0), cell.theta));

    Json stage{{"eps", sc.eps},
               {"ensemble", ensemble_json(main_stats)},
               {"acceptance_lower_bound", process.acceptance_lower_bound()},
               {"nominal_false_failure_per_band", 0.0027}};
    Json kurt = Json::array();
    for (const auto& s : trend)
        kurt.push_back({{"eps", s.eps}, {"excess_kurtosis", vector_json(s.times.back().excess_kurtosis)}});
    stage["kurtosis_trend"] = kurt;

    std::vector<StudyVerdict> vs = main_stats.verdicts;
    if (!trend.empty()) vs.push_back(kurtosis_trend(trend));
    stage["verdicts"] = verdicts_json(vs);
    ctx.summary["stages"]["simulate"] = stage;
    ctx.add("simulate", vs);

    std::vector<EnsembleStats> all{main_stats};
    for (const auto& s : trend)
        if (s.eps != sc.eps) all.push_back(s);
    ctx.csv("simulate.csv", ensemble_table(all));
    if (sc.keep_paths > 0) ctx.csv("paths.csv", paths_table(main));
    ctx.svg("covariance.svg", covariance_plot(main_stats));
}

// Parses the config; errors here leave no bundle.
RunConfig prepare_config(const RunOptions& options) {
    Json raw = load_config_json(options.config_path);
    if (!raw.is_object()) throw ConfigError("config root must be an object");
    for (const auto& o : options.overrides) apply_override(raw, o);
    if (options.seed) apply_override(raw, "numeric.seed=" + std::to_string(*options.seed));
    raw["task"] = options.command;
    return parse_config(raw, options.config_path.parent_path());
}

void publish(const fs::path& tmp, const fs::path& dest) {
    if (fs::exists(dest)) {
        if (!fs::exists(dest / "summary.json"))
            throw ConfigError("output directory " + dest.string() + " exists and is not a report bundle");
        fs::remove_all(dest);
    }
    fs::rename(tmp, dest);
}

}  // namespace

int run(const RunOptions& options, std::ostream& out, std::ostream& err) {
    RunConfig config;
    try {
        config = prepare_config(options);
    } catch (const std::exception& e) {
        err << "nlh: configuration error: " << e.what() << '\n';
        return kExitError;
    }

    const fs::path dest = !options.out_dir.empty()               ? fs::path(options.out_dir)
                          : !config.output_directory.empty()     ? fs::path(config.output_directory)
                                                                 : fs::path("nlh-out");
    fs::path tmp;
    try {
        if (fs::exists(dest) && !fs::exists(dest / "summary.json")) {
            err << "nlh: output directory " << dest << " exists and is not a report bundle\n";
            return kExitError;
        }
        if (!dest.parent_path().empty()) fs::create_directories(dest.parent_path());
        tmp = dest;
        tmp += ".tmp-" + std::to_string(::getpid());
        fs::remove_all(tmp);
        fs::create_directories(tmp);
    } catch (const std::exception& e) {
        err << "nlh: cannot prepare output directory: " << e.what() << '\n';
        return kExitError;
    }

    const std::string hash = config_hash(config);
    Json summary{{"schema_version", kSchemaVersion},
                 {"tool", "nlh"},
                 {"command", options.command},
                 {"config_hash", hash},
                 {"config", effective_config(config)},
                 {"stages", Json::object()}};
    RunLog log(tmp / "run.log");
    log.line("run", "command " + options.command + ", config hash " + hash);
    Context ctx{config, hash, tmp, options.threads, log, summary, {}, std::nullopt};

    int code = kExitPass;
    try {
        const std::string& c = options.command;
        if (c == "theta") cell_stage(ctx);
        if (c == "correctors" || c == "full-report") corrector_stage(ctx);
        if (c == "resolvent-study" || c == "full-report") resolvent_stage(ctx);
        if (c == "semigroup-study" || c == "full-report") semigroup_stage(ctx);
        if (c == "simulate" || c == "full-report") simulate_stage(ctx);
    } catch (const std::exception& e) {
        const auto* typed = dynamic_cast<const Error*>(&e);
        summary["error"] = Json{{"kind", typed ? "numerical" : "internal"}, {"message", e.what()}};
        log.line("run", std::string("error: ") + e.what());
        err << "nlh: " << e.what() << '\n';
        code = kExitError;
    }

    Json verdicts = Json::array();
    bool pass = true;
    for (const auto& [stage, v] : ctx.verdicts) {
        verdicts.push_back({{"stage", stage}, {"name", v.name}, {"pass", v.pass}, {"detail", v.detail}});
        pass = pass && v.pass;
    }
    summary["verdicts"] = verdicts;
    if (code == kExitPass && !pass) code = kExitFail;
    summary["status"] = code == kExitPass ? "PASS" : code == kExitFail ? "FAIL" : "ERROR";
    log.line("run", "status " + summary["status"].get<std::string>());

    try {
        std::ofstream(tmp / "summary.json", std::ios::binary) << summary.dump(2) << '\n';
        publish(tmp, dest);
    } catch (const std::exception& e) {
        err << "nlh: cannot write report bundle: " << e.what() << '\n';
        return kExitError;
    }
    out << summary["status"].get<std::string>() << ' ' << dest.string() << '\n';
    return code;
}

}  // namespace nlh
