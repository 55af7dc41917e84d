#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "nlh/cell.hpp"
#include "nlh/homog.hpp"
#include "nlh/process.hpp"

namespace nlh {

using Json = nlohmann::json;

Json matrix_json(const Eigen::MatrixXd& m);
Json vector_json(const Eigen::VectorXd& v);
Json verdicts_json(const std::vector<StudyVerdict>& verdicts);

/// Theta, its two routes, solver and resolution diagnostics.
Json cell_json(const CellSolution& cell);
Json resolvent_json(const ResolventStudy& study);
Json semigroup_json(const SemigroupStudy& study);
Json ensemble_json(const EnsembleStats& stats);

// ---------------------------------------------------------------------------
// CSV: '#' comment lines, one header row, values in %.16e (17 significant digits).

struct CsvTable {
    std::vector<std::string> comments;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

std::string format_double(double x);
void write_csv(const std::filesystem::path& path, const CsvTable& table);
CsvTable read_csv(const std::filesystem::path& path);

CsvTable field_table(const PeriodicField& field, const std::vector<std::string>& component_names);
CsvTable resolvent_table(const ResolventStudy& study);
CsvTable semigroup_table(const SemigroupStudy& study);
/// Long form: one row per (eps, t).
CsvTable semigroup_time_table(const SemigroupStudy& study);
/// Diagonal moments per (eps, t, component).
CsvTable ensemble_table(const std::vector<EnsembleStats>& stats);
/// One row per retained jump: path_id, t, x...
CsvTable paths_table(const TrajectoryBatch& batch);

// ---------------------------------------------------------------------------
// Minimal SVG line plots.

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> band_lo;  // optional shaded band around y
    std::vector<double> band_hi;
    bool markers = true;
};

struct Plot {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
    bool log_y = false;
    std::vector<PlotSeries> series;
};

std::string render_svg(const Plot& plot);
void write_svg(const std::filesystem::path& path, const Plot& plot);

Plot resolvent_plot(const ResolventStudy& study);
Plot semigroup_plot(const SemigroupStudy& study);
/// Empirical variance against 2 Theta t with the 3-standard-error band.
Plot covariance_plot(const EnsembleStats& stats);

}  // namespace nlh
