#include <iostream>

#include "CLI11.hpp"
#include "nlh/config.hpp"
#include "nlh/driver.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Effective diffusion for periodic nonlocal operators: cell problems, convergence studies, "
                 "jump-process simulation"};
    nlh::RunOptions options;
    std::uint64_t seed = 0;

    app.add_option("command", options.command, "theta | correctors | resolvent-study | semigroup-study | "
                                                "simulate | full-report")
        ->required()
        ->check(CLI::IsMember(nlh::task_names()));
    app.add_option("--config", options.config_path, "JSON run configuration")->required();
    auto* seed_opt = app.add_option("--seed", seed, "Master RNG seed (overrides numeric.seed)");
    app.add_option("--out", options.out_dir, "Output directory (overrides output.directory)");
    app.add_option("--threads", options.threads, "Worker threads, 0 = available parallelism")->capture_default_str();
    app.add_option("--set", options.overrides, "Override a config value: dotted.key=value (repeatable)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : nlh::kExitError;
    }
    if (*seed_opt) options.seed = seed;
    return nlh::run(options, std::cout, std::cerr);
}
