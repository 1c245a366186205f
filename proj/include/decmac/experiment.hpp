#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "decmac/oracles.hpp"
#include "decmac/solver.hpp"

namespace decmac {

class ConfigError : public std::runtime_error {
  public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

enum class RateUnit { nats, bits };

struct UserConfig {
    FadingDistribution distribution;
    double p_avg_db = 0.0;
};

struct SweepRange {
    double start_db = 0.0;
    double stop_db = 0.0;
    double step_db = 1.0;
};

struct OracleParams {
    double power_step = 0.01;
    double power_max = 0.0;  ///< 0 selects max budget / smallest atom mass
};

struct ExperimentConfig {
    std::vector<UserConfig> users;
    SolverConfig solver;
    std::optional<SweepRange> sweep;
    OracleParams oracle;
    RateUnit rate_unit = RateUnit::nats;
};

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

namespace detail {

using json = nlohmann::ordered_json;

inline void reject_unknown_keys(const json& obj, const std::vector<std::string>& known,
                                const std::string& where) {
    for (const auto& item : obj.items())
        if (std::find(known.begin(), known.end(), item.key()) == known.end())
            throw ConfigError("unknown key '" + item.key() + "' in " + where);
}

inline double require_number(const json& obj, const std::string& key,
                             const std::string& where) {
    if (!obj.contains(key))
        throw ConfigError("missing key '" + key + "' in " + where);
    if (!obj[key].is_number())
        throw ConfigError("'" + where + "." + key + "' must be a number");
    return obj[key].get<double>();
}

inline FadingDistribution parse_distribution(const json& obj, const std::string& where) {
    if (!obj.is_object() || !obj.contains("kind"))
        throw ConfigError(where + " must be an object with a 'kind' field");
    const std::string kind = obj["kind"].get<std::string>();
    FadingDistribution dist;
    if (kind == "exponential") {
        reject_unknown_keys(obj, {"kind", "mean"}, where);
        dist = ExponentialFading{require_number(obj, "mean", where)};
    } else if (kind == "deterministic") {
        reject_unknown_keys(obj, {"kind", "value"}, where);
        dist = DeterministicFading{require_number(obj, "value", where)};
    } else if (kind == "discrete") {
        reject_unknown_keys(obj, {"kind", "atoms"}, where);
        if (!obj.contains("atoms") || !obj["atoms"].is_array())
            throw ConfigError("'" + where + ".atoms' must be an array");
        DiscreteFading discrete;
        for (const auto& atom : obj["atoms"]) {
            reject_unknown_keys(atom, {"gain", "prob"}, where + ".atoms[]");
            discrete.atoms.push_back(GridAtom{require_number(atom, "gain", where + ".atoms[]"),
                                              require_number(atom, "prob", where + ".atoms[]")});
        }
        dist = std::move(discrete);
    } else {
        throw ConfigError("unknown distribution kind '" + kind + "' in " + where + ".kind");
    }
    try {
        validate(dist);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(where + ": " + e.what());
    }
    return dist;
}

inline void parse_solver(const json& obj, SolverConfig& solver) {
    reject_unknown_keys(obj,
                        {"n_bins", "max_atoms", "eps_rate", "eps_power", "delta",
                         "lambda_mode", "max_outer_iters", "max_lambda_iters", "init"},
                        "solver");
    if (obj.contains("n_bins")) solver.n_bins = obj["n_bins"].get<std::size_t>();
    if (obj.contains("max_atoms")) solver.max_atoms = obj["max_atoms"].get<std::size_t>();
    if (obj.contains("eps_rate")) solver.eps_rate = obj["eps_rate"].get<double>();
    if (obj.contains("eps_power")) solver.eps_power = obj["eps_power"].get<double>();
    if (obj.contains("delta")) solver.delta = obj["delta"].get<double>();
    if (obj.contains("max_outer_iters"))
        solver.max_outer_iters = obj["max_outer_iters"].get<std::size_t>();
    if (obj.contains("max_lambda_iters"))
        solver.max_lambda_iters = obj["max_lambda_iters"].get<std::size_t>();
    if (obj.contains("lambda_mode")) {
        const std::string mode = obj["lambda_mode"].get<std::string>();
        if (mode == "bisection")
            solver.lambda_mode = LambdaMode::bisection;
        else if (mode == "paper-step")
            solver.lambda_mode = LambdaMode::paper_step;
        else
            throw ConfigError("solver.lambda_mode must be 'bisection' or 'paper-step'");
    }
    if (obj.contains("init")) {
        const std::string init = obj["init"].get<std::string>();
        if (init == "constant")
            solver.init_mode = InitMode::constant_power;
        else if (init == "two-level")
            solver.init_mode = InitMode::two_level;
        else
            throw ConfigError("solver.init must be 'constant' or 'two-level'");
    }
    try {
        validate(solver);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

inline std::string format17(double x) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.17g", x);
    return buffer;
}

inline json lambdas_to_json(const std::vector<double>& lambdas) {
    json out = json::array();
    for (const double lambda : lambdas) {
        if (std::isinf(lambda))
            out.push_back("inf");
        else
            out.push_back(lambda);
    }
    return out;
}

inline const char* termination_name(Termination t) {
    return t == Termination::converged ? "converged" : "max_iters";
}

}  // namespace detail

/// Parses and validates a JSON experiment description. See the repository
/// README for the schema; any malformed or unknown field raises ConfigError.
inline ExperimentConfig parse_config(const std::string& text) {
    detail::json root;
    try {
        root = detail::json::parse(text);
    } catch (const detail::json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("config root must be a JSON object");
    detail::reject_unknown_keys(root, {"users", "solver", "sweep", "oracle", "rate_unit"},
                                "config");

    ExperimentConfig config;
    if (!root.contains("users") || !root["users"].is_array() || root["users"].empty())
        throw ConfigError("users required");
    std::size_t index = 0;
    for (const auto& user : root["users"]) {
        const std::string where = "users[" + std::to_string(index) + "]";
        detail::reject_unknown_keys(user, {"distribution", "p_avg_db"}, where);
        if (!user.contains("distribution"))
            throw ConfigError("missing key 'distribution' in " + where);
        UserConfig parsed;
        parsed.distribution = detail::parse_distribution(user["distribution"],
                                                         where + ".distribution");
        parsed.p_avg_db = detail::require_number(user, "p_avg_db", where);
        config.users.push_back(std::move(parsed));
        ++index;
    }

    if (root.contains("solver")) detail::parse_solver(root["solver"], config.solver);

    if (root.contains("sweep")) {
        const auto& sweep = root["sweep"];
        detail::reject_unknown_keys(sweep, {"p_avg_db_start", "p_avg_db_stop", "p_avg_db_step"},
                                    "sweep");
        SweepRange range;
        range.start_db = detail::require_number(sweep, "p_avg_db_start", "sweep");
        range.stop_db = detail::require_number(sweep, "p_avg_db_stop", "sweep");
        range.step_db = detail::require_number(sweep, "p_avg_db_step", "sweep");
        if (!(range.step_db > 0.0)) throw ConfigError("sweep.p_avg_db_step must be positive");
        if (range.stop_db < range.start_db) throw ConfigError("empty sweep range");
        config.sweep = range;
    }

    if (root.contains("oracle")) {
        const auto& oracle = root["oracle"];
        detail::reject_unknown_keys(oracle, {"power_step", "power_max"}, "oracle");
        if (oracle.contains("power_step"))
            config.oracle.power_step = oracle["power_step"].get<double>();
        if (oracle.contains("power_max"))
            config.oracle.power_max = oracle["power_max"].get<double>();
        if (!(config.oracle.power_step > 0.0))
            throw ConfigError("oracle.power_step must be positive");
        if (config.oracle.power_max < 0.0)
            throw ConfigError("oracle.power_max must be nonnegative");
    }

    if (root.contains("rate_unit")) {
        const std::string unit = root["rate_unit"].get<std::string>();
        if (unit == "nats")
            config.rate_unit = RateUnit::nats;
        else if (unit == "bits")
            config.rate_unit = RateUnit::bits;
        else
            throw ConfigError("rate_unit must be 'nats' or 'bits'");
    }
    return config;
}

inline ExperimentConfig load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str());
}

namespace detail {

inline std::vector<UserSpec> to_user_specs(const ExperimentConfig& config) {
    std::vector<UserSpec> users;
    users.reserve(config.users.size());
    for (const UserConfig& user : config.users)
        users.push_back(UserSpec{user.distribution, db_to_linear(user.p_avg_db)});
    return users;
}

inline double unit_factor(RateUnit unit) {
    return unit == RateUnit::bits ? 1.0 / std::log(2.0) : 1.0;
}

inline const char* unit_name(RateUnit unit) {
    return unit == RateUnit::bits ? "bits" : "nats";
}

inline std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    return out;
}

inline void write_policies_csv(const std::filesystem::path& path,
                               const std::vector<PowerPolicy>& policies) {
    std::ofstream out = open_output(path);
    out << "user,gain,prob,power\n";
    for (std::size_t j = 0; j < policies.size(); ++j) {
        const PowerPolicy& policy = policies[j];
        for (std::size_t k = 0; k < policy.powers.size(); ++k) {
            const GridAtom& a = policy.grid->atoms[k];
            out << (j + 1) << ',' << format17(a.gain) << ',' << format17(a.prob) << ','
                << format17(policy.powers[k]) << '\n';
        }
    }
}

inline void write_trajectory_csv(const std::filesystem::path& path,
                                 const std::vector<double>& trajectory, double factor) {
    std::ofstream out = open_output(path);
    out << "iter,sum_rate\n";
    for (std::size_t n = 0; n < trajectory.size(); ++n)
        out << n << ',' << format17(trajectory[n] * factor) << '\n';
}

inline void write_summary_json(const std::filesystem::path& path, const SolveResult& result,
                               RateUnit unit) {
    json summary;
    summary["capacity"] = result.capacity * unit_factor(unit);
    summary["unit"] = unit_name(unit);
    summary["users"] = result.policies.size();
    summary["lambdas"] = lambdas_to_json(result.lambdas);
    summary["kkt_residual"] = result.kkt_residual;
    summary["outer_iters"] = result.outer_iters;
    summary["termination"] = termination_name(result.termination);
    std::ofstream out = open_output(path);
    out << summary.dump(2) << '\n';
}

}  // namespace detail

/// Solves a single instance and writes policies.csv, trajectory.csv and
/// summary.json into out_dir. Returns the process exit code.
inline int run_solve(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                     bool verbose = false, std::ostream& diag = std::cerr) {
    SolveResult result;
    try {
        result = am_solve(detail::to_user_specs(config), config.solver);
    } catch (const std::exception& e) {
        diag << "error: " << e.what() << '\n';
        return 1;
    }
    const double factor = detail::unit_factor(config.rate_unit);
    if (verbose)
        diag << "capacity " << detail::format17(result.capacity * factor) << ' '
             << detail::unit_name(config.rate_unit) << " after " << result.outer_iters
             << " sweeps (" << detail::termination_name(result.termination)
             << ", kkt residual " << result.kkt_residual << ")\n";
    try {
        std::filesystem::create_directories(out_dir);
        detail::write_policies_csv(out_dir / "policies.csv", result.policies);
        detail::write_trajectory_csv(out_dir / "trajectory.csv", result.rate_trajectory,
                                     factor);
        detail::write_summary_json(out_dir / "summary.json", result, config.rate_unit);
    } catch (const std::exception& e) {
        diag << "error: " << e.what() << '\n';
        return 1;
    }
    return result.termination == Termination::converged ? 0 : 2;
}

/// Runs a budget sweep (the same p_avg in dB applied to every user) and writes
/// capacity_vs_pavg.csv. Lambdas are warm-started between adjacent points.
inline int run_sweep(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                     bool verbose = false, std::ostream& diag = std::cerr) {
    if (!config.sweep) {
        diag << "error: sweep block required\n";
        return 1;
    }
    const SweepRange range = *config.sweep;
    std::vector<double> points;
    for (std::size_t i = 0;; ++i) {
        const double db = range.start_db + static_cast<double>(i) * range.step_db;
        if (db > range.stop_db + 1e-9 * std::max(1.0, std::abs(range.step_db))) break;
        points.push_back(db);
    }

    struct Row {
        double db;
        double capacity;
        std::size_t outer_iters;
        double kkt;
        std::string termination;
    };
    std::vector<Row> rows;
    std::vector<double> warm;
    bool all_converged = true;
    for (const double db : points) {
        std::vector<UserSpec> users = detail::to_user_specs(config);
        for (UserSpec& user : users) user.p_avg = db_to_linear(db);
        try {
            const SolveResult result = am_solve(users, config.solver, warm);
            rows.push_back(Row{db, result.capacity, result.outer_iters, result.kkt_residual,
                               detail::termination_name(result.termination)});
            warm = result.lambdas;
            if (result.termination != Termination::converged) all_converged = false;
            if (verbose)
                diag << "p_avg " << db << " dB: capacity "
                     << detail::format17(result.capacity) << " nats, "
                     << result.outer_iters << " sweeps\n";
        } catch (const CalibrationFailure& e) {
            rows.push_back(Row{db, std::numeric_limits<double>::quiet_NaN(), 0,
                               std::numeric_limits<double>::quiet_NaN(), "error"});
            all_converged = false;
            diag << "error at " << db << " dB: " << e.what() << '\n';
        }
    }

    const double factor = detail::unit_factor(config.rate_unit);
    try {
        std::filesystem::create_directories(out_dir);
        std::ofstream out = detail::open_output(out_dir / "capacity_vs_pavg.csv");
        out << "p_avg_db,capacity,outer_iters,kkt_residual,termination\n";
        for (const Row& row : rows)
            out << detail::format17(row.db) << ',' << detail::format17(row.capacity * factor)
                << ',' << row.outer_iters << ',' << detail::format17(row.kkt) << ','
                << row.termination << '\n';
    } catch (const std::exception& e) {
        diag << "error: " << e.what() << '\n';
        return 1;
    }
    return all_converged ? 0 : 2;
}

/// Solves a tiny discrete instance with both the alternating-maximization
/// solver and the exhaustive lattice search, then reports the capacity gap
/// with a pass/fail verdict at 1e-3 nats.
inline int run_compare_oracle(const ExperimentConfig& config, bool verbose = false,
                              std::ostream& out = std::cout,
                              std::ostream& diag = std::cerr) {
    BruteForceSpec spec;
    std::vector<double> budgets;
    double default_power_max = 0.0;
    for (std::size_t j = 0; j < config.users.size(); ++j) {
        if (!std::holds_alternative<DiscreteFading>(config.users[j].distribution))
            throw ConfigError("compare-oracle requires discrete fading for every user");
        spec.grids.push_back(quantize(config.users[j].distribution, 1));
        budgets.push_back(db_to_linear(config.users[j].p_avg_db));
        double min_prob = 1.0;
        for (const GridAtom& a : spec.grids.back().atoms)
            min_prob = std::min(min_prob, a.prob);
        default_power_max = std::max(default_power_max, budgets.back() / min_prob);
    }
    spec.power_grid_step = config.oracle.power_step;
    spec.power_max =
        config.oracle.power_max > 0.0 ? config.oracle.power_max : default_power_max;

    SolveResult am;
    BruteForceResult reference;
    try {
        am = am_solve(detail::to_user_specs(config), config.solver);
        reference = brute_force_discrete(spec, budgets);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (verbose)
        diag << "alternating maximization: " << detail::format17(am.capacity)
             << " nats; lattice search: " << detail::format17(reference.capacity)
             << " nats\n";

    const double gap = std::abs(am.capacity - reference.capacity);
    const double tolerance_nats = 1e-3;
    const bool pass = gap <= tolerance_nats;
    const double factor = detail::unit_factor(config.rate_unit);
    detail::json report;
    report["am_capacity"] = am.capacity * factor;
    report["brute_force_capacity"] = reference.capacity * factor;
    report["gap"] = gap * factor;
    report["tolerance"] = tolerance_nats * factor;
    report["unit"] = detail::unit_name(config.rate_unit);
    report["pass"] = pass;
    out << report.dump(2) << '\n';
    return pass ? 0 : 2;
}

}  // namespace decmac
