#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace decmac {

/// One point mass of a discretized fading-power distribution.
struct GridAtom {
    double gain = 0.0;  ///< linear power gain v = |h|^2
    double prob = 0.0;  ///< probability mass, in (0, 1]
};

/// Rayleigh fading expressed in power: the gain is exponential with the given mean.
struct ExponentialFading {
    double mean = 1.0;
};

/// Non-fading link with a fixed power gain.
struct DeterministicFading {
    double value = 1.0;
};

/// Finite-support fading law. Atoms must be sorted by strictly increasing gain
/// and their masses must sum to one.
struct DiscreteFading {
    std::vector<GridAtom> atoms;
};

using FadingDistribution =
    std::variant<ExponentialFading, DeterministicFading, DiscreteFading>;

/// Mass beyond this quantile of an unbounded fading law is folded into the
/// highest quantization bin.
inline constexpr double kTailMass = 1e-6;

inline void validate(const FadingDistribution& dist) {
    if (const auto* e = std::get_if<ExponentialFading>(&dist)) {
        if (!(e->mean > 0.0) || !std::isfinite(e->mean))
            throw std::invalid_argument("exponential fading mean must be positive");
        return;
    }
    if (const auto* d = std::get_if<DeterministicFading>(&dist)) {
        if (!(d->value >= 0.0) || !std::isfinite(d->value))
            throw std::invalid_argument("deterministic fading gain must be nonnegative");
        return;
    }
    const auto& atoms = std::get<DiscreteFading>(dist).atoms;
    if (atoms.empty())
        throw std::invalid_argument("discrete fading needs at least one atom");
    double mass = 0.0;
    double prev_gain = -std::numeric_limits<double>::infinity();
    for (const GridAtom& a : atoms) {
        if (!std::isfinite(a.gain) || a.gain < 0.0)
            throw std::invalid_argument("discrete fading gains must be finite and nonnegative");
        if (a.gain <= prev_gain)
            throw std::invalid_argument("discrete fading gains must be strictly increasing");
        if (!(a.prob > 0.0) || a.prob > 1.0)
            throw std::invalid_argument("discrete fading masses must lie in (0, 1]");
        prev_gain = a.gain;
        mass += a.prob;
    }
    if (std::abs(mass - 1.0) > 1e-12)
        throw std::invalid_argument("discrete fading masses must sum to 1 (got " +
                                    std::to_string(mass) + ")");
}

/// Finite quantization of a fading-power distribution, suitable for replacing
/// expectation integrals by sums. Gains are strictly increasing and the masses
/// sum to one.
struct FadingGrid {
    std::vector<GridAtom> atoms;
    FadingDistribution source;
};

inline void validate(const FadingGrid& grid) {
    if (grid.atoms.empty()) throw std::invalid_argument("fading grid is empty");
    double mass = 0.0;
    double prev_gain = -std::numeric_limits<double>::infinity();
    for (const GridAtom& a : grid.atoms) {
        if (!std::isfinite(a.gain) || a.gain < 0.0)
            throw std::invalid_argument("fading grid gains must be finite and nonnegative");
        if (a.gain <= prev_gain)
            throw std::invalid_argument("fading grid gains must be strictly increasing");
        if (!(a.prob > 0.0) || a.prob > 1.0)
            throw std::invalid_argument("fading grid masses must lie in (0, 1]");
        prev_gain = a.gain;
        mass += a.prob;
    }
    if (std::abs(mass - 1.0) > 1e-10)
        throw std::invalid_argument("fading grid masses must sum to 1");
}

/**
 * Quantizes a fading-power distribution onto a finite grid.
 *
 * Continuous laws are split into n_bins equiprobable bins; bin edges sit at
 * the k/n quantiles and the unbounded tail is cut at the 1 - 1e-6 quantile,
 * with the residual tail mass folded into the top bin. Each bin is represented
 * by its conditional mean, so the grid reproduces the (truncated) first moment
 * of the law exactly.
 *
 * Deterministic laws become a single unit-mass atom; discrete laws pass
 * through unchanged and n_bins is ignored.
 */
inline FadingGrid quantize(const FadingDistribution& dist, std::size_t n_bins) {
    validate(dist);
    if (n_bins == 0) throw std::invalid_argument("quantize: n_bins must be positive");

    if (const auto* d = std::get_if<DeterministicFading>(&dist))
        return FadingGrid{{GridAtom{d->value, 1.0}}, dist};
    if (const auto* disc = std::get_if<DiscreteFading>(&dist))
        return FadingGrid{disc->atoms, dist};

    const double mu = std::get<ExponentialFading>(dist).mean;
    const auto n = static_cast<double>(n_bins);
    if (n * kTailMass >= 1.0)
        throw std::invalid_argument(
            "quantize: n_bins too large for the tail truncation quantile");

    // Survival values at the bin edges; the final edge carries the folded tail.
    // Partial first moment of exp(mu) over [a, b]: (a+mu)S(a) - (b+mu)S(b).
    std::vector<GridAtom> atoms;
    atoms.reserve(n_bins);
    double s_lo = 1.0;
    double edge_lo = 0.0;
    for (std::size_t k = 0; k < n_bins; ++k) {
        const double s_hi = (k + 1 < n_bins)
                                ? 1.0 - static_cast<double>(k + 1) / n
                                : kTailMass;
        const double edge_hi = -mu * std::log(s_hi);
        const double moment = (edge_lo + mu) * s_lo - (edge_hi + mu) * s_hi;
        atoms.push_back(GridAtom{moment * n, 1.0 / n});
        s_lo = s_hi;
        edge_lo = edge_hi;
    }
    return FadingGrid{std::move(atoms), dist};
}

/// First moment of the grid, sum of prob * gain.
inline double grid_mean(const FadingGrid& grid) {
    validate(grid);
    double m = 0.0;
    for (const GridAtom& a : grid.atoms) m += a.prob * a.gain;
    return m;
}

}  // namespace decmac
