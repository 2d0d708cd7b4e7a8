#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "commands.hpp"

using namespace fbsde::cli;

int main(int argc, char** argv) {
    CLI::App app{"Monte-Carlo maximum-principle toolkit for partially observed FBSDE control"};
    std::string command, config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> paths, threads;
    std::optional<std::string> output_dir;
    app.add_option("command", command, "simulate | grad-check | optimize | verify-mp | lq-bench")
        ->required()
        ->check(CLI::IsMember({"simulate", "grad-check", "optimize", "verify-mp", "lq-bench"}));
    app.add_option("--config", config_path, "experiment config (JSON)")->required();
    app.add_option("--seed", seed, "override monte_carlo.seed");
    app.add_option("--paths", paths, "override monte_carlo.paths");
    app.add_option("--threads", threads, "override monte_carlo.threads");
    app.add_option("--output-dir", output_dir, "override outputs.directory");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitPass : kExitUsage;
    }

    ExperimentConfig cfg;
    try {
        cfg = load_config(config_path);
        if (seed) cfg.seed = cfg.optimizer.seed = *seed;
        if (paths) {
            if (*paths < 2) throw ConfigError("--paths must be >= 2");
            cfg.paths = *paths;
        }
        if (threads) cfg.threads = *threads;
        if (output_dir) cfg.outputs.directory = *output_dir;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        return run_command(command, cfg, std::cout, std::cerr);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitCheckFailed;
    }
}
