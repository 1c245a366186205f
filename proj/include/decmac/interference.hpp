#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "decmac/policy.hpp"

namespace decmac {

struct PointMass {
    double value = 0.0;
    double prob = 0.0;
};

/// Discrete distribution of the aggregate received interference power
/// Y = sum over the other users of v * P(v). Atoms are sorted by value.
struct InterferenceDistribution {
    std::vector<PointMass> atoms;
    bool exact = true;  ///< false once any convolution step had to be rebinned
};

namespace detail {

/// Sorts by value and merges exactly equal atoms.
inline void normalize_atoms(std::vector<PointMass>& atoms) {
    std::sort(atoms.begin(), atoms.end(),
              [](const PointMass& a, const PointMass& b) { return a.value < b.value; });
    std::size_t out = 0;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        if (out > 0 && atoms[out - 1].value == atoms[i].value) {
            atoms[out - 1].prob += atoms[i].prob;
        } else {
            atoms[out++] = atoms[i];
        }
    }
    atoms.resize(out);
}

/// Distribution of one user's received-power term v * P(v).
inline std::vector<PointMass> term_distribution(const PowerPolicy& policy) {
    validate_shape(policy);
    std::vector<PointMass> atoms;
    atoms.reserve(policy.powers.size());
    for (std::size_t k = 0; k < policy.powers.size(); ++k) {
        const GridAtom& a = policy.grid->atoms[k];
        atoms.push_back(PointMass{a.gain * policy.powers[k], a.prob});
    }
    normalize_atoms(atoms);
    return atoms;
}

inline std::vector<PointMass> convolve(const std::vector<PointMass>& a,
                                       const std::vector<PointMass>& b) {
    std::vector<PointMass> out;
    out.reserve(a.size() * b.size());
    for (const PointMass& x : a)
        for (const PointMass& y : b)
            out.push_back(PointMass{x.value + y.value, x.prob * y.prob});
    normalize_atoms(out);
    return out;
}

/**
 * Reduces a sorted atom list to at most max_atoms mass-preserving bins over
 * [0, y_max]. Bin nodes sit on a lattice uniform in log(1 + y), capped at the
 * next power of two above y_max so the lattice stays fixed while the
 * underlying policies make small moves. Each atom splits its mass linearly
 * between the two neighboring nodes with weights that keep the atom's first
 * moment; total mass and the first moment of the distribution are preserved
 * exactly, the atom at zero stays at zero, and the reduced functional varies
 * continuously with the input atom positions.
 */
inline std::vector<PointMass> rebin(const std::vector<PointMass>& atoms,
                                    std::size_t max_atoms) {
    if (atoms.size() <= max_atoms) return atoms;

    int cap_exponent = 0;
    std::frexp(atoms.back().value, &cap_exponent);
    const auto n_cells = static_cast<double>(max_atoms - 1);
    const double dz = std::log1p(std::ldexp(1.0, cap_exponent)) / n_cells;

    std::vector<double> mass(max_atoms, 0.0);
    for (const PointMass& atom : atoms) {
        const double cell =
            std::min(n_cells - 1.0, std::floor(std::log1p(atom.value) / dz));
        const double left = std::expm1(cell * dz);
        const double right = std::expm1((cell + 1.0) * dz);
        const double share = (right - atom.value) / (right - left);
        const auto k = static_cast<std::size_t>(cell);
        mass[k] += atom.prob * share;
        mass[k + 1] += atom.prob * (1.0 - share);
    }

    std::vector<PointMass> out;
    out.reserve(max_atoms);
    for (std::size_t k = 0; k < mass.size(); ++k)
        if (mass[k] > 0.0)
            out.push_back(PointMass{std::expm1(static_cast<double>(k) * dz), mass[k]});
    return out;
}

}  // namespace detail

/**
 * Builds the distribution of the independent sum of v * P(v) over the given
 * policies by sequential convolution. Whenever an intermediate atom count
 * exceeds max_atoms the distribution is rebinned onto mass- and
 * moment-preserving bins. An empty policy list yields the unit mass at zero.
 */
inline InterferenceDistribution build_interference(
    const std::vector<PowerPolicy>& others, std::size_t max_atoms) {
    if (max_atoms < 2)
        throw std::invalid_argument("build_interference: max_atoms must be at least 2");
    InterferenceDistribution dist;
    dist.atoms = {PointMass{0.0, 1.0}};
    for (const PowerPolicy& policy : others) {
        dist.atoms = detail::convolve(dist.atoms, detail::term_distribution(policy));
        if (dist.atoms.size() > max_atoms) {
            dist.atoms = detail::rebin(dist.atoms, max_atoms);
            dist.exact = false;
        }
    }
    return dist;
}

/// The marginal integral f(x) = E[1 / (1 + x + Y)]; strictly decreasing in x
/// with values in (0, 1].
inline double eval_f(double x, const InterferenceDistribution& y) {
    if (!(x >= 0.0))
        throw std::invalid_argument("eval_f: argument must be nonnegative");
    double sum = 0.0;
    for (const PointMass& a : y.atoms) sum += a.prob / (1.0 + x + a.value);
    return sum;
}

/**
 * Inverse of eval_f: the unique x >= 0 with f(x) = target, or 0 when the
 * target is not below f(0). Found by bisection on [0, 1/target], which
 * brackets the root because f(x) <= 1/(1+x) < 1/x; the bracket is first
 * tightened with the pointwise bounds 1/(1+x+y_max) <= f(x) <= 1/(1+x+y_min).
 * Resolved to absolute tolerance 1e-12 on x or 1e-14 on f.
 */
inline double invert_f(double target, const InterferenceDistribution& y) {
    if (!(target > 0.0))
        throw std::invalid_argument("invert_f: target must be positive");
    if (target >= eval_f(0.0, y)) return 0.0;

    const double inv_t = 1.0 / target;
    double lo = std::max(0.0, inv_t - 1.0 - y.atoms.back().value);
    double hi = std::min(inv_t, inv_t - 1.0 - y.atoms.front().value);
    if (!(hi > lo)) return lo;

    for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;  // bracket at floating-point resolution
        const double fm = eval_f(mid, y);
        if (std::abs(fm - target) <= 1e-14 && hi - lo <= 1e-10 * (1.0 + mid))
            return mid;
        if (fm > target)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace decmac
