#pragma once

#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "decmac/experiment.hpp"

namespace decmac {

/// Command-line entry point shared by the binary and the tests.
/// Exit codes: 0 success/converged, 1 usage or config error, 2 non-convergence.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& diag = std::cerr) {
    CLI::App app{"Optimal decentralized power control and ergodic sum-capacity "
                 "for fading multiple-access channels"};
    app.require_subcommand(1);

    std::string rate_unit;
    bool verbose = false;
    app.add_option("--rate-unit", rate_unit, "Report rates in 'nats' or 'bits'")
        ->check(CLI::IsMember({"nats", "bits"}));
    app.add_flag("--verbose", verbose, "Print progress to stderr");

    std::string solve_config, solve_out;
    CLI::App* solve = app.add_subcommand("solve", "Solve one instance and export results");
    solve->fallthrough();
    solve->add_option("--config", solve_config, "Experiment config (JSON)")->required();
    solve->add_option("--out", solve_out, "Output directory")->required();

    std::string sweep_config, sweep_out;
    CLI::App* sweep = app.add_subcommand("sweep", "Sweep the per-user budget in dB");
    sweep->fallthrough();
    sweep->add_option("--config", sweep_config, "Experiment config (JSON)")->required();
    sweep->add_option("--out", sweep_out, "Output directory")->required();

    std::string compare_config;
    CLI::App* compare = app.add_subcommand(
        "compare-oracle", "Check the solver against the exhaustive lattice search");
    compare->fallthrough();
    compare->add_option("--config", compare_config, "Experiment config (JSON)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, diag);
        return code == 0 ? 0 : 1;
    }

    try {
        const std::string config_path =
            solve->parsed() ? solve_config : (sweep->parsed() ? sweep_config : compare_config);
        ExperimentConfig config = load_config_file(config_path);
        if (!rate_unit.empty())
            config.rate_unit = rate_unit == "bits" ? RateUnit::bits : RateUnit::nats;
        if (solve->parsed())
            return run_solve(config, solve_out, verbose, diag);
        if (sweep->parsed())
            return run_sweep(config, sweep_out, verbose, diag);
        return run_compare_oracle(config, verbose, out, diag);
    } catch (const ConfigError& e) {
        diag << "config error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        diag << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace decmac
