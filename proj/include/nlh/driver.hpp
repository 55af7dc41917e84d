#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace nlh {

inline constexpr int kExitPass = 0;
inline constexpr int kExitFail = 1;
inline constexpr int kExitError = 2;

struct RunOptions {
    std::string command;
    std::filesystem::path config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;  // overrides output.directory
    unsigned threads = 0; // 0: available parallelism
    std::vector<std::string> overrides;
};

/// Runs one command and writes the report bundle (summary.json, CSV, SVG,
/// run.log) atomically into the output directory.
///
/// Returns 0 when every verdict passes, 1 on a failed verdict and 2 on a
/// configuration or numerical error. Configuration errors leave no bundle;
/// numerical errors leave a partial one.
int run(const RunOptions& options, std::ostream& out, std::ostream& err);

}  // namespace nlh
