#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "nlh/cell.hpp"
#include "nlh/coefficients.hpp"
#include "nlh/homog.hpp"
#include "nlh/kernel.hpp"

namespace nlh {

inline constexpr int kSchemaVersion = 1;

struct KernelConfig {
    std::string family = "gaussian";
    double sigma = 0.3;    // gaussian
    double radius = 0.25;  // compact_bump
    double scale = 1.0;
    std::string file;      // tabulated: two-column (z, a) text file
};

/// Constant, trigonometric (`mean` + `terms`) or tabulated (`file`).
struct CoefficientConfig {
    double mean = 1.0;
    std::vector<TrigTerm> terms;
    std::string file;
};

struct CellConfig {
    int n = 128;
    std::string backend = "direct";
    double tail_tol = kDefaultTailTol;
    double solvability_rel_tol = 1e-8;
    double residual_rel_tol = 1e-10;
    int max_iterations = 10000;
    bool refinement_check = true;
    double refinement_rel_tol = 1e-6;
    double memory_cap_mib = 1024;
    double dirichlet_rel_tol = 1e-8;
};

struct SourceConfig {
    double amplitude = -1.0;
    double width = 0.70710678118654752;
};

struct ResolventConfig {
    std::vector<double> eps{0.4, 0.2, 0.1, 0.05};
    double shift = 1.0;
    double half_width = 10.0;
    int nodes_per_cell = 8;
    double tail_mass = 1e-8;
    SourceConfig source;
    double final_ratio_max = 1.0 / 3.0;
    double step_ratio_max = 0.9;
};

struct SemigroupConfig {
    std::vector<double> eps{0.4, 0.2, 0.1, 0.05};
    double horizon = 1.0;
    double dt = 0.1;
    double mass_tol = 1e-8;
    double half_width = 10.0;
    int nodes_per_cell = 8;
    double tail_mass = 1e-8;
    SourceConfig source;
};

struct SimulateConfig {
    double eps = 0.05;
    std::vector<double> kurtosis_eps{0.5, 0.2, 0.05};
    double horizon = 1.0;
    std::vector<double> times{0.5, 1.0};
    std::uint64_t paths = 100000;
    double proposal_budget = 2e9;
    std::uint64_t keep_paths = 0;
    double envelope = 0.0;  // 0 selects sup mu
};

struct OutputConfig {
    bool csv = true;
    bool svg = true;
};

struct RunConfig {
    int dim = 1;
    KernelConfig kernel;
    CoefficientConfig lambda;
    CoefficientConfig mu{1.0, {}, {}};
    std::string task = "full-report";
    std::uint64_t seed = 1;
    CellConfig cell;
    ResolventConfig resolvent;
    SemigroupConfig semigroup;
    SimulateConfig simulate;
    OutputConfig output;
    /// Not part of the effective config (and so not of the hash).
    std::string output_directory;
    /// Relative file paths are resolved against this directory.
    std::filesystem::path base_dir;
};

const std::vector<std::string>& task_names();

/// Schema validation with unknown-key rejection; throws ConfigError.
RunConfig parse_config(const nlohmann::json& raw, const std::filesystem::path& base_dir = {});
nlohmann::json load_config_json(const std::filesystem::path& path);

/// Applies "dotted.key=value"; value is parsed as JSON when possible, else as a string.
void apply_override(nlohmann::json& raw, const std::string& assignment);

/// Complete effective configuration with every default filled in.
nlohmann::json effective_config(const RunConfig& config);
/// SHA-256 hex digest of the canonical (sorted-key) effective config.
std::string config_hash(const RunConfig& config);
std::string sha256_hex(const std::string& data);

Kernel make_kernel(const RunConfig& config);
CoefficientSpec make_coefficient(const CoefficientConfig& c, int dim, const std::filesystem::path& base_dir);
CellProblem make_cell_problem(const RunConfig& config);
HomogProblem make_resolvent_problem(const RunConfig& config);
HomogProblem make_semigroup_problem(const RunConfig& config);

}  // namespace nlh
