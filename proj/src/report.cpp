#include "nlh/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "nlh/errors.hpp"

namespace nlh {

Json matrix_json(const Eigen::MatrixXd& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Json vector_json(const Eigen::VectorXd& v) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

Json verdicts_json(const std::vector<StudyVerdict>& verdicts) {
    Json out = Json::array();
    for (const auto& v : verdicts) out.push_back({{"name", v.name}, {"pass", v.pass}, {"detail", v.detail}});
    return out;
}

namespace {

Json solve_json(const SolveReport& r) {
    Json j{{"backend", std::string(to_string(r.backend))},
           {"solvability", vector_json(r.solvability)},
           {"relative_residual", vector_json(r.residual)},
           {"iterations", r.iterations}};
    j["contraction_estimate"] = std::isfinite(r.contraction) ? Json(r.contraction) : Json(nullptr);
    j["smallest_singular_values"] = r.smallest_singular_values;
    return j;
}

}  // namespace

Json cell_json(const CellSolution& cell) {
    const CellDiagnostics& d = cell.diagnostics;
    Json diag{{"alpha1", d.bounds.alpha1},
              {"alpha2", d.bounds.alpha2},
              {"fold_shells", d.k_max},
              {"fold_tail_bound", d.fold_tail_bound},
              {"solvability_first_order", vector_json(d.solvability1)},
              {"solvability_second_order", matrix_json(d.solvability2)},
              {"solve_kappa1", solve_json(d.solve1)},
              {"solve_kappa2", solve_json(d.solve2)},
              {"pd_margin", d.pd_margin},
              {"pd_margin_relative", d.pd_margin_relative},
              {"dirichlet_relative_difference", d.dirichlet_rel_diff},
              {"pd_margin_warning", d.pd_margin_warning},
              {"warning", d.warning}};
    diag["refinement_relative_change"] =
        d.refinement_rel_change ? Json(*d.refinement_rel_change) : Json(nullptr);
    return Json{{"dim", cell.grid.dim()},
                {"n", cell.grid.n()},
                {"theta", matrix_json(cell.theta)},
                {"theta_sym", matrix_json(cell.theta_sym())},
                {"theta_tilde", matrix_json(cell.theta_tilde)},
                {"theta_dirichlet", matrix_json(cell.theta_dirichlet)},
                {"nu_mean", cell.nu_mean},
                {"kernel_moments",
                 {{"mass", cell.moments.mass},
                  {"second", matrix_json(cell.moments.second)},
                  {"abs_first", cell.moments.abs_first},
                  {"fourth_component", cell.moments.fourth_component}}},
                {"kappa1_sup", cell.kappa1.values.cwiseAbs().maxCoeff()},
                {"kappa2_sup", cell.kappa2.values.cwiseAbs().maxCoeff()},
                {"diagnostics", diag}};
}

Json resolvent_json(const ResolventStudy& study) {
    Json pts = Json::array();
    for (const auto& p : study.points)
        pts.push_back({{"eps", p.eps},
                       {"points", p.points},
                       {"spacing", p.spacing},
                       {"error_l2", p.error_l2},
                       {"error_sup", p.error_sup},
                       {"phi_norm", p.phi_norm},
                       {"corrector_gap", p.corrector_gap},
                       {"solver_residual", p.solver_residual},
                       {"limit_residual", p.limit_residual},
                       {"weighted_norm_u", p.weighted_norm_u},
                       {"weighted_norm_f", p.weighted_norm_f}});
    return Json{{"shift", study.shift}, {"points", pts}, {"verdicts", verdicts_json(study.verdicts)},
                {"pass", study.pass()}};
}

Json semigroup_json(const SemigroupStudy& study) {
    Json pts = Json::array();
    for (const auto& p : study.points)
        pts.push_back({{"eps", p.eps},
                       {"points", p.points},
                       {"sup_error_l2", p.sup_error_l2},
                       {"sup_error_sup", p.sup_error_max},
                       {"mass_drift", p.mass_drift},
                       {"max_norm_ratio", p.max_norm_ratio},
                       {"error_by_time", p.error_by_time}});
    return Json{{"horizon", study.horizon}, {"dt", study.dt},      {"times", study.times},
                {"points", pts},            {"verdicts", verdicts_json(study.verdicts)}, {"pass", study.pass()}};
}

Json ensemble_json(const EnsembleStats& stats) {
    Json times = Json::array();
    for (const auto& t : stats.times)
        times.push_back({{"t", t.t},
                         {"mean", vector_json(t.mean)},
                         {"mean_offset", vector_json(t.mean_offset)},
                         {"mean_norm", t.mean_norm},
                         {"raw_mean_norm", t.raw_mean_norm},
                         {"mean_bound", t.mean_bound},
                         {"cov", matrix_json(t.cov)},
                         {"target_cov", matrix_json(t.target_cov)},
                         {"cov_se", matrix_json(t.cov_se)},
                         {"cov_z", matrix_json(t.cov_z)},
                         {"excess_kurtosis", vector_json(t.excess_kurtosis)}});
    return Json{{"eps", stats.eps},
                {"paths", stats.paths},
                {"mean_jumps", stats.mean_jumps},
                {"times", times},
                {"increment_corr", matrix_json(stats.increment_corr)},
                {"increment_corr_bound", stats.increment_corr_bound},
                {"verdicts", verdicts_json(stats.verdicts)},
                {"pass", stats.pass()}};
}

// ---------------------------------------------------------------------------
// CSV

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.16e", x);
    return buf;
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    for (const auto& c : table.comments) out << "# " << c << '\n';
    for (std::size_t i = 0; i < table.columns.size(); ++i) out << (i ? "," : "") << table.columns[i];
    out << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_double(row[i]);
        out << '\n';
    }
    if (!out) throw Error("failed writing " + path.string());
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path.string());
    CsvTable table;
    std::string line;
    bool header = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            table.comments.push_back(line.size() > 2 ? line.substr(2) : "");
            continue;
        }
        std::stringstream ss(line);
        std::string cell;
        if (!header) {
            while (std::getline(ss, cell, ',')) table.columns.push_back(cell);
            header = true;
            continue;
        }
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (row.size() != table.columns.size()) throw Error("csv row width mismatch in " + path.string());
        table.rows.push_back(std::move(row));
    }
    return table;
}

CsvTable field_table(const PeriodicField& field, const std::vector<std::string>& component_names) {
    CsvTable t;
    const int d = field.grid.dim();
    t.comments.push_back("field on the " + std::to_string(field.grid.n()) + "^" + std::to_string(d) +
                         " torus grid, role " + std::string(to_string(field.role)));
    static const char* axes[] = {"xi1", "xi2", "xi3"};
    for (int c = 0; c < d; ++c) t.columns.emplace_back(axes[c]);
    for (int c = 0; c < field.components(); ++c)
        t.columns.push_back(c < static_cast<int>(component_names.size()) ? component_names[static_cast<std::size_t>(c)]
                                                                         : "c" + std::to_string(c));
    for (std::size_t i = 0; i < field.grid.size(); ++i) {
        std::vector<double> row;
        const Point x = field.grid.node(i);
        for (int c = 0; c < d; ++c) row.push_back(x[c]);
        for (int c = 0; c < field.components(); ++c) row.push_back(field.values(static_cast<Eigen::Index>(i), c));
        t.rows.push_back(std::move(row));
    }
    return t;
}

CsvTable resolvent_table(const ResolventStudy& study) {
    CsvTable t;
    t.comments.push_back("resolvent convergence, shift m = " + format_double(study.shift));
    t.columns = {"eps", "points", "error_L2", "error_sup", "phi_norm", "corrector_gap", "runtime_s"};
    for (const auto& p : study.points)
        t.rows.push_back({p.eps, static_cast<double>(p.points), p.error_l2, p.error_sup, p.phi_norm,
                          p.corrector_gap, p.runtime_s});
    return t;
}

CsvTable semigroup_table(const SemigroupStudy& study) {
    CsvTable t;
    t.comments.push_back("semigroup convergence, horizon " + format_double(study.horizon) + ", dt " +
                         format_double(study.dt));
    t.columns = {"eps", "points", "sup_error_L2", "sup_error_sup", "mass_drift", "max_norm_ratio", "runtime_s"};
    for (const auto& p : study.points)
        t.rows.push_back({p.eps, static_cast<double>(p.points), p.sup_error_l2, p.sup_error_max, p.mass_drift,
                          p.max_norm_ratio, p.runtime_s});
    return t;
}

CsvTable semigroup_time_table(const SemigroupStudy& study) {
    CsvTable t;
    t.comments.push_back("discrete L2 distance between the nonlocal and the limit semigroup");
    t.columns = {"eps", "t", "error_L2"};
    for (const auto& p : study.points)
        for (std::size_t k = 0; k < study.times.size(); ++k) t.rows.push_back({p.eps, study.times[k], p.error_by_time[k]});
    return t;
}

CsvTable ensemble_table(const std::vector<EnsembleStats>& stats) {
    CsvTable t;
    t.comments.push_back("rescaled ensemble moments; target variance is 2 Theta t");
    t.columns = {"eps", "t", "component", "mean", "variance", "target_variance", "se", "z", "excess_kurtosis"};
    for (const auto& s : stats)
        for (const auto& ts : s.times)
            for (Eigen::Index c = 0; c < ts.mean.size(); ++c)
                t.rows.push_back({s.eps, ts.t, static_cast<double>(c), ts.mean[c], ts.cov(c, c), ts.target_cov(c, c),
                                  ts.cov_se(c, c), ts.cov_z(c, c), ts.excess_kurtosis[c]});
    return t;
}

CsvTable paths_table(const TrajectoryBatch& batch) {
    CsvTable t;
    t.comments.push_back("rescaled trajectories, eps = " + format_double(batch.eps));
    t.columns = {"path_id", "t"};
    static const char* axes[] = {"x1", "x2", "x3"};
    for (int c = 0; c < batch.dim; ++c) t.columns.emplace_back(axes[c]);
    for (std::size_t p = 0; p < batch.kept.size(); ++p) {
        const Trajectory& tr = batch.kept[p];
        for (std::size_t k = 0; k < tr.times.size(); ++k) {
            std::vector<double> row{static_cast<double>(p), tr.times[k]};
            for (int c = 0; c < batch.dim; ++c) row.push_back(tr.positions[k][c]);
            t.rows.push_back(std::move(row));
        }
    }
    return t;
}

// ---------------------------------------------------------------------------
// SVG

namespace {

constexpr double kWidth = 640, kHeight = 420, kLeft = 78, kRight = 170, kTop = 40, kBottom = 56;
const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", x);
    return buf;
}

std::string tick_label(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            default: out += c;
        }
    }
    return out;
}

struct Axis {
    double lo = 0, hi = 1;
    bool log = false;
    double pix_lo = 0, pix_hi = 1;

    double map(double v) const {
        const double a = log ? std::log10(lo) : lo, b = log ? std::log10(hi) : hi;
        const double s = log ? std::log10(v) : v;
        return pix_lo + (s - a) / (b - a) * (pix_hi - pix_lo);
    }

    std::vector<double> ticks() const {
        std::vector<double> out;
        if (log) {
            for (double e = std::floor(std::log10(lo)); e <= std::ceil(std::log10(hi)); e += 1.0) {
                const double v = std::pow(10.0, e);
                if (v >= lo * (1 - 1e-12) && v <= hi * (1 + 1e-12)) out.push_back(v);
            }
            if (out.size() < 2) out = {lo, hi};
            return out;
        }
        const double raw = (hi - lo) / 5.0;
        const double mag = std::pow(10.0, std::floor(std::log10(raw)));
        double step = mag;
        for (double m : {1.0, 2.0, 5.0, 10.0})
            if (m * mag >= raw) {
                step = m * mag;
                break;
            }
        for (double v = std::ceil(lo / step) * step; v <= hi + 1e-12 * step; v += step) out.push_back(v);
        return out;
    }
};

Axis make_axis(const std::vector<double>& values, bool log, double pix_lo, double pix_hi) {
    Axis a;
    a.log = log;
    a.pix_lo = pix_lo;
    a.pix_hi = pix_hi;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double v : values) {
        if (!std::isfinite(v) || (log && v <= 0.0)) continue;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (!std::isfinite(lo)) {
        lo = log ? 1e-3 : 0.0;
        hi = 1.0;
    }
    if (log) {
        if (hi <= lo) hi = lo * 10.0;
        const double pad = std::pow(hi / lo, 0.05);
        a.lo = lo / pad;
        a.hi = hi * pad;
    } else {
        if (hi <= lo) {
            hi = lo + 1.0;
        }
        const double pad = 0.05 * (hi - lo);
        a.lo = lo - pad;
        a.hi = hi + pad;
    }
    return a;
}

}  // namespace

std::string render_svg(const Plot& plot) {
    std::vector<double> xs, ys;
    for (const auto& s : plot.series) {
        xs.insert(xs.end(), s.x.begin(), s.x.end());
        ys.insert(ys.end(), s.y.begin(), s.y.end());
        ys.insert(ys.end(), s.band_lo.begin(), s.band_lo.end());
        ys.insert(ys.end(), s.band_hi.begin(), s.band_hi.end());
    }
    const Axis ax = make_axis(xs, plot.log_x, kLeft, kWidth - kRight);
    const Axis ay = make_axis(ys, plot.log_y, kHeight - kBottom, kTop);
    auto ok = [&](double x, double y) {
        return std::isfinite(x) && std::isfinite(y) && (!plot.log_x || x > 0) && (!plot.log_y || y > 0);
    };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << num(kWidth / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
      << escape(plot.title) << "</text>\n";
    const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
    o << "<rect x=\"" << num(x0) << "\" y=\"" << num(y1) << "\" width=\"" << num(x1 - x0) << "\" height=\""
      << num(y0 - y1) << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (double t : ax.ticks()) {
        const double px = ax.map(t);
        o << "<line x1=\"" << num(px) << "\" y1=\"" << num(y0) << "\" x2=\"" << num(px) << "\" y2=\"" << num(y1)
          << "\" stroke=\"#ddd\"/>\n";
        o << "<text x=\"" << num(px) << "\" y=\"" << num(y0 + 16) << "\" text-anchor=\"middle\">" << tick_label(t)
          << "</text>\n";
    }
    for (double t : ay.ticks()) {
        const double py = ay.map(t);
        o << "<line x1=\"" << num(x0) << "\" y1=\"" << num(py) << "\" x2=\"" << num(x1) << "\" y2=\"" << num(py)
          << "\" stroke=\"#ddd\"/>\n";
        o << "<text x=\"" << num(x0 - 6) << "\" y=\"" << num(py + 4) << "\" text-anchor=\"end\">" << tick_label(t)
          << "</text>\n";
    }
    o << "<text x=\"" << num((x0 + x1) / 2) << "\" y=\"" << num(kHeight - 14) << "\" text-anchor=\"middle\">"
      << escape(plot.x_label) << "</text>\n";
    o << "<text transform=\"translate(18," << num((y0 + y1) / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
      << escape(plot.y_label) << "</text>\n";

    for (std::size_t s = 0; s < plot.series.size(); ++s) {
        const PlotSeries& ser = plot.series[s];
        const char* color = kColors[s % (sizeof kColors / sizeof kColors[0])];
        if (!ser.band_lo.empty() && ser.band_lo.size() == ser.x.size() && ser.band_hi.size() == ser.x.size()) {
            std::ostringstream pts;
            for (std::size_t i = 0; i < ser.x.size(); ++i)
                if (ok(ser.x[i], ser.band_hi[i])) pts << num(ax.map(ser.x[i])) << ',' << num(ay.map(ser.band_hi[i])) << ' ';
            for (std::size_t i = ser.x.size(); i-- > 0;)
                if (ok(ser.x[i], ser.band_lo[i])) pts << num(ax.map(ser.x[i])) << ',' << num(ay.map(ser.band_lo[i])) << ' ';
            o << "<polygon points=\"" << pts.str() << "\" fill=\"" << color << "\" fill-opacity=\"0.18\" stroke=\"none\"/>\n";
        }
        std::ostringstream line;
        for (std::size_t i = 0; i < ser.x.size() && i < ser.y.size(); ++i)
            if (ok(ser.x[i], ser.y[i])) line << num(ax.map(ser.x[i])) << ',' << num(ay.map(ser.y[i])) << ' ';
        o << "<polyline points=\"" << line.str() << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\"/>\n";
        if (ser.markers)
            for (std::size_t i = 0; i < ser.x.size() && i < ser.y.size(); ++i)
                if (ok(ser.x[i], ser.y[i]))
                    o << "<circle cx=\"" << num(ax.map(ser.x[i])) << "\" cy=\"" << num(ay.map(ser.y[i]))
                      << "\" r=\"3.5\" fill=\"" << color << "\"/>\n";
        const double ly = kTop + 14 + 20.0 * static_cast<double>(s);
        o << "<line x1=\"" << num(x1 + 12) << "\" y1=\"" << num(ly - 4) << "\" x2=\"" << num(x1 + 34) << "\" y2=\""
          << num(ly - 4) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        o << "<text x=\"" << num(x1 + 40) << "\" y=\"" << num(ly) << "\">" << escape(ser.label) << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

void write_svg(const std::filesystem::path& path, const Plot& plot) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << render_svg(plot);
}

Plot resolvent_plot(const ResolventStudy& study) {
    Plot p{"Resolvent convergence", "eps", "discrete L2 norm", true, true, {}};
    PlotSeries err{"||u_eps - u_0||", {}, {}, {}, {}, true};
    PlotSeries phi{"||phi_eps||", {}, {}, {}, {}, true};
    for (const auto& pt : study.points) {
        err.x.push_back(pt.eps);
        err.y.push_back(pt.error_l2);
        phi.x.push_back(pt.eps);
        phi.y.push_back(pt.phi_norm);
    }
    p.series = {err, phi};
    return p;
}

Plot semigroup_plot(const SemigroupStudy& study) {
    Plot p{"Semigroup convergence", "eps", "sup_t ||T_eps(t) f - T_0(t) f||", true, true, {}};
    PlotSeries s{"sup over t <= " + tick_label(study.horizon), {}, {}, {}, {}, true};
    for (const auto& pt : study.points) {
        s.x.push_back(pt.eps);
        s.y.push_back(pt.sup_error_l2);
    }
    p.series = {s};
    return p;
}

Plot covariance_plot(const EnsembleStats& stats) {
    Plot p{"Variance of X_eps(t), eps = " + tick_label(stats.eps), "t", "variance (component 1)", false, false, {}};
    PlotSeries target{"2 Theta t +- 3 se", {0.0}, {0.0}, {0.0}, {0.0}, false};
    PlotSeries emp{"empirical", {0.0}, {0.0}, {}, {}, true};
    for (const auto& ts : stats.times) {
        target.x.push_back(ts.t);
        target.y.push_back(ts.target_cov(0, 0));
        target.band_lo.push_back(ts.target_cov(0, 0) - 3.0 * ts.cov_se(0, 0));
        target.band_hi.push_back(ts.target_cov(0, 0) + 3.0 * ts.cov_se(0, 0));
        emp.x.push_back(ts.t);
        emp.y.push_back(ts.cov(0, 0));
    }
    p.series = {target, emp};
    return p;
}

}  // namespace nlh
