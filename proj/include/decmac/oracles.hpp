#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <stdexcept>
#include <vector>

#include "decmac/fading.hpp"
#include "decmac/policy.hpp"
#include "decmac/solver.hpp"

namespace decmac {

struct WaterfillingResult {
    PowerPolicy policy;
    double capacity = 0.0;  ///< nats
};

/**
 * Closed-form single-user reference: waterfilling P(v) = (1/lambda - 1/v)+,
 * with the multiplier found by scalar bisection on the budget equation to
 * absolute tolerance 1e-12. Independent of the interference machinery.
 */
inline WaterfillingResult waterfilling_single_user(const FadingGrid& grid, double p_avg) {
    validate(grid);
    if (!(p_avg >= 0.0) || !std::isfinite(p_avg))
        throw std::invalid_argument("waterfilling_single_user: budget must be finite and nonnegative");

    auto shared = std::make_shared<const FadingGrid>(grid);
    WaterfillingResult result;
    result.policy = PowerPolicy{shared, std::vector<double>(grid.atoms.size(), 0.0),
                                std::numeric_limits<double>::infinity(), p_avg};

    double max_gain = 0.0;
    for (const GridAtom& a : grid.atoms) max_gain = std::max(max_gain, a.gain);
    if (p_avg == 0.0 || max_gain == 0.0) return result;  // degenerate: stay silent

    auto spent = [&](double lambda) {
        double total = 0.0;
        for (const GridAtom& a : grid.atoms)
            if (a.gain > 0.0)
                total += a.prob * std::max(0.0, 1.0 / lambda - 1.0 / a.gain);
        return total;
    };

    double hi = max_gain;  // spends nothing
    double lo = hi;
    while (spent(lo) < p_avg) lo *= 0.5;
    const double tol = 1e-12 * std::max(1.0, p_avg);
    while (hi - lo > 1e-15 * hi) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (spent(mid) >= p_avg ? lo : hi) = mid;
    }
    double lambda = hi;
    if (std::abs(spent(lambda) - p_avg) > tol) lambda = 0.5 * (lo + hi);

    result.policy.lambda = lambda;
    for (std::size_t k = 0; k < grid.atoms.size(); ++k) {
        const GridAtom& a = grid.atoms[k];
        if (a.gain <= 0.0) continue;
        const double p = std::max(0.0, 1.0 / lambda - 1.0 / a.gain);
        result.policy.powers[k] = p;
        result.capacity += a.prob * std::log1p(a.gain * p);
    }
    return result;
}

/// Instance bounds for the exhaustive reference search.
struct BruteForceSpec {
    std::vector<FadingGrid> grids;  ///< at most 3 users with at most 3 atoms each
    double power_grid_step = 0.01;
    double power_max = 1.0;
};

struct BruteForceResult {
    std::vector<std::vector<double>> powers;  ///< per user, per atom
    double capacity = 0.0;                    ///< nats
};

namespace detail {

/// Exact discrete sum-rate by direct enumeration of the joint gain outcomes.
/// Deliberately shares nothing with the convolution path.
inline double enumerated_rate(const std::vector<FadingGrid>& grids,
                              const std::vector<std::vector<double>>& powers) {
    std::vector<std::size_t> index(grids.size(), 0);
    double rate = 0.0;
    while (true) {
        double mass = 1.0;
        double received = 0.0;
        for (std::size_t j = 0; j < grids.size(); ++j) {
            const GridAtom& a = grids[j].atoms[index[j]];
            mass *= a.prob;
            received += a.gain * powers[j][index[j]];
        }
        rate += mass * std::log1p(received);
        std::size_t j = 0;
        while (j < grids.size() && ++index[j] == grids[j].atoms.size()) index[j++] = 0;
        if (j == grids.size()) break;
    }
    return rate;
}

/// All candidate policies for one user on the power lattice {0, step, ...}.
/// The objective is nondecreasing in every power level, so only candidates
/// whose designated last coordinate is raised to the largest feasible level
/// are produced; every budget-maximal lattice point appears among them.
inline std::vector<std::vector<double>> lattice_policies(const FadingGrid& grid,
                                                         double budget, double step,
                                                         double power_max) {
    const std::size_t n = grid.atoms.size();
    const auto max_level = static_cast<long>(std::floor(power_max / step + 1e-9));
    const double slack = 1e-9 * std::max(1.0, budget);

    // Cheapest atom last: once it is maxed out no coordinate can grow further.
    std::size_t last = 0;
    for (std::size_t k = 1; k < n; ++k)
        if (grid.atoms[k].prob < grid.atoms[last].prob) last = k;

    std::vector<std::vector<double>> policies;
    std::vector<double> current(n, 0.0);
    auto emit = [&](double remaining) {
        const double cost = grid.atoms[last].prob * step;
        const auto level = std::min(
            max_level, static_cast<long>(std::floor((remaining + slack) / cost)));
        current[last] = static_cast<double>(std::max(0L, level)) * step;
        policies.push_back(current);
    };
    auto recurse = [&](auto&& self, std::size_t k, double remaining) -> void {
        while (k < n && k == last) ++k;
        if (k >= n) {
            emit(remaining);
            return;
        }
        const double cost = grid.atoms[k].prob * step;
        const auto levels = std::min(
            max_level, static_cast<long>(std::floor((remaining + slack) / cost)));
        for (long level = 0; level <= levels; ++level) {
            current[k] = static_cast<double>(level) * step;
            self(self, k + 1, remaining - static_cast<double>(level) * cost);
        }
        current[k] = 0.0;
    };
    recurse(recurse, 0, budget);
    return policies;
}

}  // namespace detail

/**
 * Exhaustive reference optimum over lattice power levels, subject to the
 * per-user budgets. Restricted to tiny instances; the concavity of the
 * objective makes the lattice optimum approach the true optimum at rate
 * proportional to the step size.
 */
inline BruteForceResult brute_force_discrete(const BruteForceSpec& spec,
                                             const std::vector<double>& budgets) {
    const std::size_t n_users = spec.grids.size();
    if (n_users == 0 || n_users > 3)
        throw std::invalid_argument("brute_force_discrete: user count must be 1..3");
    if (budgets.size() != n_users)
        throw std::invalid_argument("brute_force_discrete: one budget per user required");
    std::size_t total_atoms = 0;
    for (const FadingGrid& grid : spec.grids) {
        validate(grid);
        if (grid.atoms.size() > 3)
            throw std::invalid_argument("brute_force_discrete: at most 3 atoms per user");
        total_atoms += grid.atoms.size();
    }
    if (total_atoms > 8)
        throw std::invalid_argument("brute_force_discrete: total atom count must be <= 8");
    if (!(spec.power_grid_step > 0.0))
        throw std::invalid_argument("brute_force_discrete: step must be positive");
    for (const double b : budgets) {
        if (!(b >= 0.0)) throw std::invalid_argument("brute_force_discrete: negative budget");
        if (spec.power_max < b)
            throw std::invalid_argument("brute_force_discrete: power_max below a budget");
    }

    std::vector<std::vector<std::vector<double>>> candidates(n_users);
    for (std::size_t j = 0; j < n_users; ++j)
        candidates[j] = detail::lattice_policies(spec.grids[j], budgets[j],
                                                 spec.power_grid_step, spec.power_max);

    BruteForceResult best;
    best.capacity = -1.0;
    std::vector<std::vector<double>> assignment(n_users);
    auto search = [&](auto&& self, std::size_t j) -> void {
        if (j == n_users) {
            const double rate = detail::enumerated_rate(spec.grids, assignment);
            if (rate > best.capacity) {
                best.capacity = rate;
                best.powers = assignment;
            }
            return;
        }
        for (const auto& policy : candidates[j]) {
            assignment[j] = policy;
            self(self, j + 1);
        }
    };
    search(search, 0);
    return best;
}

/// Sum-rate of the trivial feasible policies P_i(v) = p_avg_i; a lower bound
/// on the optimum and the rate of the solver's default starting point.
inline double constant_power_rate(const std::vector<FadingGrid>& grids,
                                  const std::vector<double>& budgets,
                                  std::size_t max_atoms = 512) {
    if (grids.size() != budgets.size())
        throw std::invalid_argument("constant_power_rate: one budget per grid required");
    if (grids.empty()) throw std::invalid_argument("constant_power_rate: no users");
    std::vector<PowerPolicy> policies;
    policies.reserve(grids.size());
    for (std::size_t j = 0; j < grids.size(); ++j) {
        validate(grids[j]);
        if (!(budgets[j] >= 0.0))
            throw std::invalid_argument("constant_power_rate: negative budget");
        policies.push_back(PowerPolicy{
            std::make_shared<const FadingGrid>(grids[j]),
            std::vector<double>(grids[j].atoms.size(), budgets[j]), 0.0, budgets[j]});
    }
    return sum_rate(policies, max_atoms);
}

}  // namespace decmac
