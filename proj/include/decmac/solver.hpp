#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "decmac/fading.hpp"
#include "decmac/interference.hpp"
#include "decmac/policy.hpp"

namespace decmac {

enum class LambdaMode { bisection, paper_step };
enum class InitMode { constant_power, two_level };
enum class Termination { converged, max_iters };

struct SolverConfig {
    std::size_t n_bins = 200;         ///< quantization bins per continuous user
    std::size_t max_atoms = 512;      ///< convolution cap before rebinning
    double eps_rate = 1e-7;           ///< outer stop: sum-rate increment, nats
    double eps_power = 1e-6;          ///< budget match tolerance, relative
    double delta = 0.01;              ///< lambda step size in paper_step mode
    LambdaMode lambda_mode = LambdaMode::bisection;
    std::size_t max_outer_iters = 500;
    std::size_t max_lambda_iters = 200;
    InitMode init_mode = InitMode::constant_power;
};

inline void validate(const SolverConfig& config) {
    if (config.n_bins == 0) throw std::invalid_argument("solver config: n_bins must be positive");
    if (config.max_atoms < 2) throw std::invalid_argument("solver config: max_atoms must be at least 2");
    if (!(config.eps_rate > 0.0)) throw std::invalid_argument("solver config: eps_rate must be positive");
    if (!(config.eps_power > 0.0)) throw std::invalid_argument("solver config: eps_power must be positive");
    if (!(config.delta > 0.0)) throw std::invalid_argument("solver config: delta must be positive");
    if (config.max_outer_iters == 0) throw std::invalid_argument("solver config: max_outer_iters must be positive");
    if (config.max_lambda_iters == 0) throw std::invalid_argument("solver config: max_lambda_iters must be positive");
}

/// One user of the channel: fading law plus average-power budget (linear units).
struct UserSpec {
    FadingDistribution distribution;
    double p_avg = 1.0;
};

struct SolveResult {
    std::vector<PowerPolicy> policies;
    std::vector<double> lambdas;          ///< +inf marks a zero-budget user
    std::vector<double> rate_trajectory;  ///< R^0, R^1, ... in nats
    double capacity = 0.0;                ///< final trajectory entry, nats
    double kkt_residual = 0.0;
    Termination termination = Termination::converged;
    std::size_t outer_iters = 0;
};

/// Raised when a lambda calibration cannot meet its budget tolerance.
class CalibrationFailure : public std::runtime_error {
  public:
    CalibrationFailure(std::size_t user_index, double lambda, double achieved_power)
        : std::runtime_error("lambda calibration failed for user " +
                             std::to_string(user_index) + " (lambda=" +
                             std::to_string(lambda) + ", achieved average power=" +
                             std::to_string(achieved_power) + ")"),
          user_index(user_index),
          lambda(lambda),
          achieved_power(achieved_power) {}

    std::size_t user_index;
    double lambda;
    double achieved_power;
};

/// Average ergodic sum-rate E[log(1 + sum of v_i P_i(v_i))] in nats, computed
/// by convolving all per-user received-power terms.
inline double sum_rate(const std::vector<PowerPolicy>& policies, std::size_t max_atoms) {
    if (policies.empty()) throw std::invalid_argument("sum_rate: no policies");
    const InterferenceDistribution total = build_interference(policies, max_atoms);
    double rate = 0.0;
    for (const PointMass& a : total.atoms) rate += a.prob * std::log1p(a.value);
    return rate;
}

namespace detail {

/// Power levels maximizing one user's partial objective at a fixed multiplier:
/// P(v) = f^{-1}(lambda / v) / v, zero at zero gain or when lambda/v >= f(0).
inline std::vector<double> response_powers(const FadingGrid& grid, double lambda,
                                           const InterferenceDistribution& y) {
    const double f0 = eval_f(0.0, y);
    std::vector<double> powers(grid.atoms.size(), 0.0);
    for (std::size_t k = 0; k < grid.atoms.size(); ++k) {
        const double v = grid.atoms[k].gain;
        if (v <= 0.0) continue;
        const double target = lambda / v;
        if (target >= f0) continue;
        powers[k] = invert_f(target, y) / v;
    }
    return powers;
}

inline double average_power(const FadingGrid& grid, const std::vector<double>& powers) {
    double avg = 0.0;
    for (std::size_t k = 0; k < grid.atoms.size(); ++k)
        avg += grid.atoms[k].prob * powers[k];
    return avg;
}

}  // namespace detail

/// Best response of one user against the other users' fixed policies.
inline PowerPolicy best_response(std::shared_ptr<const FadingGrid> grid, double lambda,
                                 const std::vector<PowerPolicy>& others,
                                 std::size_t max_atoms) {
    if (!grid) throw std::invalid_argument("best_response: null grid");
    if (!(lambda > 0.0) || !std::isfinite(lambda))
        throw std::invalid_argument("best_response: lambda must be positive");
    const InterferenceDistribution y = build_interference(others, max_atoms);
    std::vector<double> powers = detail::response_powers(*grid, lambda, y);
    const double achieved = detail::average_power(*grid, powers);
    return PowerPolicy{std::move(grid), std::move(powers), lambda, achieved};
}

struct CalibrationOutcome {
    PowerPolicy policy;
    double lambda = 0.0;
    bool lambda_unbounded = false;  ///< set for zero-budget users (lambda = +inf)
    double achieved_power = 0.0;
    std::size_t evaluations = 0;
};

/**
 * Finds the multiplier whose best response meets the user's power budget.
 *
 * In bisection mode the average power is monotone decreasing in lambda, so a
 * bracket is grown by doubling/halving from the warm-started lambda and then
 * bisected; the feasible (under-budget) endpoint is returned. In paper_step
 * mode lambda walks in fixed steps of the configured delta, halving the step
 * whenever the budget mismatch changes sign, until the mismatch is within
 * eps_power; the step size persists across calls through step_state.
 *
 * A zero budget returns the all-zero policy with the multiplier pinned at
 * +infinity and lambda_unbounded set.
 */
inline CalibrationOutcome calibrate_lambda(std::size_t user_index,
                                           const std::vector<PowerPolicy>& others,
                                           std::shared_ptr<const FadingGrid> grid,
                                           double p_avg, const SolverConfig& config,
                                           double lambda_init = 1.0,
                                           double* step_state = nullptr) {
    if (!grid) throw std::invalid_argument("calibrate_lambda: null grid");
    if (!(p_avg >= 0.0) || !std::isfinite(p_avg))
        throw std::invalid_argument("calibrate_lambda: budget must be finite and nonnegative");
    validate(config);

    if (p_avg == 0.0) {
        CalibrationOutcome out;
        out.policy = PowerPolicy{grid, std::vector<double>(grid->atoms.size(), 0.0),
                                 std::numeric_limits<double>::infinity(), 0.0};
        out.lambda = std::numeric_limits<double>::infinity();
        out.lambda_unbounded = true;
        return out;
    }

    const InterferenceDistribution y = build_interference(others, config.max_atoms);
    const double tol = config.eps_power * std::max(p_avg, 1e-12);
    const std::size_t max_evals = config.max_lambda_iters;
    std::size_t evals = 0;

    std::vector<double> powers;
    auto evaluate = [&](double lambda) {
        ++evals;
        powers = detail::response_powers(*grid, lambda, y);
        return detail::average_power(*grid, powers);
    };
    auto accept = [&](double lambda, std::vector<double> accepted, double achieved) {
        CalibrationOutcome out;
        out.policy = PowerPolicy{grid, std::move(accepted), lambda, p_avg};
        out.lambda = lambda;
        out.achieved_power = achieved;
        out.evaluations = evals;
        return out;
    };

    double lambda = (std::isfinite(lambda_init) && lambda_init > 0.0) ? lambda_init : 1.0;

    if (config.lambda_mode == LambdaMode::paper_step) {
        double step = (step_state && *step_state > 0.0) ? *step_state : config.delta;
        int prev_sign = 0;
        while (evals < max_evals) {
            const double achieved = evaluate(lambda);
            const double mismatch = p_avg - achieved;
            if (std::abs(mismatch) <= tol) {
                if (step_state) *step_state = step;
                return accept(lambda, std::move(powers), achieved);
            }
            const int sign = mismatch > 0.0 ? 1 : -1;
            if (prev_sign != 0 && sign != prev_sign) step *= 0.5;
            prev_sign = sign;
            // Under-budget means lambda is too large; step it down, and up
            // in the opposite case.
            if (sign > 0)
                lambda = (lambda - step > 0.0) ? lambda - step : 0.5 * lambda;
            else
                lambda += step;
        }
        throw CalibrationFailure(user_index, lambda, detail::average_power(*grid, powers));
    }

    // Bisection mode. Invariant: average power at lo is >= p_avg, at hi <= p_avg.
    double achieved = evaluate(lambda);
    if (std::abs(achieved - p_avg) <= 1e-13 * std::max(p_avg, 1.0) && achieved <= p_avg + tol)
        return accept(lambda, std::move(powers), achieved);

    double lo = lambda;
    double hi = lambda;
    std::vector<double> powers_hi;
    double achieved_hi = 0.0;
    if (achieved > p_avg) {
        while (true) {
            hi *= 2.0;
            if (evals >= max_evals || hi > 1e300)
                throw CalibrationFailure(user_index, hi, achieved);
            achieved_hi = evaluate(hi);
            if (achieved_hi <= p_avg) break;
            lo = hi;
        }
        powers_hi = powers;
    } else {
        powers_hi = powers;
        achieved_hi = achieved;
        while (true) {
            lo *= 0.5;
            if (evals >= max_evals || lo < 1e-300)
                throw CalibrationFailure(user_index, lo, achieved);
            achieved = evaluate(lo);
            if (achieved >= p_avg) break;
            hi = lo;
            achieved_hi = achieved;
            powers_hi = powers;
        }
    }

    while (hi - lo > 1e-13 * hi && evals < max_evals) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double mid_power = evaluate(mid);
        if (mid_power >= p_avg) {
            lo = mid;
        } else {
            hi = mid;
            achieved_hi = mid_power;
            powers_hi = powers;
        }
    }
    if (std::abs(achieved_hi - p_avg) > tol)
        throw CalibrationFailure(user_index, hi, achieved_hi);
    return accept(hi, std::move(powers_hi), achieved_hi);
}

/**
 * Stationarity certificate: the largest relative violation, over users and
 * positive-power atoms, of v * f(v P(v)) = lambda, folding in zero-power atoms
 * where v * f(0) exceeds lambda. Zero for an exact optimum.
 */
inline double kkt_residual(const std::vector<PowerPolicy>& policies,
                           const std::vector<double>& lambdas, std::size_t max_atoms) {
    if (policies.size() != lambdas.size())
        throw std::invalid_argument("kkt_residual: one lambda per policy required");
    double residual = 0.0;
    std::vector<PowerPolicy> others;
    for (std::size_t j = 0; j < policies.size(); ++j) {
        const double lambda = lambdas[j];
        if (std::isinf(lambda) && lambda > 0.0) continue;  // zero-budget user
        if (!(lambda > 0.0))
            throw std::invalid_argument("kkt_residual: lambdas must be positive");
        others.clear();
        for (std::size_t i = 0; i < policies.size(); ++i)
            if (i != j) others.push_back(policies[i]);
        const InterferenceDistribution y = build_interference(others, max_atoms);
        const double f0 = eval_f(0.0, y);
        const PowerPolicy& policy = policies[j];
        validate_shape(policy);
        for (std::size_t k = 0; k < policy.powers.size(); ++k) {
            const double v = policy.grid->atoms[k].gain;
            const double p = policy.powers[k];
            if (p > 0.0) {
                residual = std::max(residual,
                                    std::abs(v * eval_f(v * p, y) - lambda) / lambda);
            } else {
                const double excess = v * f0 - lambda * (1.0 + 1e-9);
                if (excess > 0.0) residual = std::max(residual, excess / lambda);
            }
        }
    }
    return residual;
}

namespace detail {

inline std::vector<double> initial_powers(const FadingGrid& grid, double p_avg,
                                          InitMode mode) {
    std::vector<double> powers(grid.atoms.size(), 0.0);
    if (p_avg <= 0.0) return powers;
    if (mode == InitMode::constant_power) {
        std::fill(powers.begin(), powers.end(), p_avg);
        return powers;
    }
    // Two-level start: silent below the median gain, flat above it.
    double cum = 0.0;
    std::size_t split = 0;
    while (split < grid.atoms.size() && cum < 0.5) cum += grid.atoms[split++].prob;
    if (split > 0) --split;
    double upper_mass = 0.0;
    for (std::size_t k = split; k < grid.atoms.size(); ++k) upper_mass += grid.atoms[k].prob;
    for (std::size_t k = split; k < grid.atoms.size(); ++k) powers[k] = p_avg / upper_mass;
    return powers;
}

}  // namespace detail

/**
 * Alternating maximization over the users' power controls.
 *
 * Starting from budget-feasible policies, each sweep recalibrates every user
 * in index order against the others' current policies and records the sum-rate
 * R^n. The loop stops once the increment R^n - R^{n-1} stays below eps_rate
 * for two consecutive sweeps (a single sub-eps_rate increment can be a
 * measurement artifact of the capped convolution) or when the sweep cap is
 * reached. Calibration failures propagate.
 *
 * warm_lambdas, when nonempty, seeds the per-user multipliers (one per user).
 */
inline SolveResult am_solve(const std::vector<UserSpec>& users, const SolverConfig& config,
                            const std::vector<double>& warm_lambdas = {}) {
    validate(config);
    if (users.empty()) throw std::invalid_argument("am_solve: at least one user required");
    if (!warm_lambdas.empty() && warm_lambdas.size() != users.size())
        throw std::invalid_argument("am_solve: warm_lambdas size mismatch");
    const std::size_t n_users = users.size();

    std::vector<std::shared_ptr<const FadingGrid>> grids;
    grids.reserve(n_users);
    std::vector<PowerPolicy> policies;
    policies.reserve(n_users);
    std::vector<double> lambdas(n_users, 1.0);
    std::vector<double> steps(n_users, config.delta);
    for (std::size_t j = 0; j < n_users; ++j) {
        if (!(users[j].p_avg >= 0.0) || !std::isfinite(users[j].p_avg))
            throw std::invalid_argument("am_solve: budgets must be nonnegative");
        grids.push_back(std::make_shared<const FadingGrid>(
            quantize(users[j].distribution, config.n_bins)));
        policies.push_back(PowerPolicy{
            grids.back(), detail::initial_powers(*grids.back(), users[j].p_avg, config.init_mode),
            1.0, users[j].p_avg});
        if (!warm_lambdas.empty() && std::isfinite(warm_lambdas[j]) && warm_lambdas[j] > 0.0)
            lambdas[j] = warm_lambdas[j];
    }

    SolveResult result;
    result.rate_trajectory.push_back(sum_rate(policies, config.max_atoms));
    result.termination = Termination::max_iters;

    std::vector<PowerPolicy> others;
    others.reserve(n_users > 0 ? n_users - 1 : 0);
    std::size_t small_increments = 0;
    for (std::size_t n = 1; n <= config.max_outer_iters; ++n) {
        for (std::size_t j = 0; j < n_users; ++j) {
            others.clear();
            for (std::size_t i = 0; i < n_users; ++i)
                if (i != j) others.push_back(policies[i]);
            CalibrationOutcome out = calibrate_lambda(j, others, grids[j], users[j].p_avg,
                                                      config, lambdas[j], &steps[j]);
            policies[j] = std::move(out.policy);
            lambdas[j] = out.lambda;
        }
        const double rate = sum_rate(policies, config.max_atoms);
        result.rate_trajectory.push_back(rate);
        result.outer_iters = n;
        small_increments =
            (rate - result.rate_trajectory[n - 1] < config.eps_rate) ? small_increments + 1 : 0;
        if (small_increments >= 2) {
            result.termination = Termination::converged;
            break;
        }
    }

    result.policies = std::move(policies);
    result.lambdas = std::move(lambdas);
    result.capacity = result.rate_trajectory.back();
    result.kkt_residual = kkt_residual(result.policies, result.lambdas, config.max_atoms);
    return result;
}

}  // namespace decmac
