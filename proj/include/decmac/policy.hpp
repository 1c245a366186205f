#pragma once

#include <cstddef>
#include <limits>
#include <memory>
#include <stdexcept>
#include <vector>

#include "decmac/fading.hpp"

namespace decmac {

/// A power-control function sampled on one user's fading grid: powers[k] is
/// the transmit power chosen when the observed gain equals grid->atoms[k].gain.
struct PowerPolicy {
    std::shared_ptr<const FadingGrid> grid;
    std::vector<double> powers;  ///< nonnegative, one entry per grid atom
    double lambda = 0.0;         ///< Lagrange multiplier; +inf for a zero-budget user
    double p_avg = 0.0;          ///< average-power budget, linear units
};

inline void validate_shape(const PowerPolicy& policy) {
    if (!policy.grid) throw std::invalid_argument("power policy has no grid");
    if (policy.powers.size() != policy.grid->atoms.size())
        throw std::invalid_argument("power policy length does not match its grid");
}

/// Expected transmit power of the policy: sum of prob[k] * powers[k].
inline double average_power(const PowerPolicy& policy) {
    validate_shape(policy);
    double avg = 0.0;
    for (std::size_t k = 0; k < policy.powers.size(); ++k)
        avg += policy.grid->atoms[k].prob * policy.powers[k];
    return avg;
}

struct MonotoneCheck {
    bool monotone = true;
    std::ptrdiff_t violation_index = -1;  ///< first offending atom, -1 if none
};

/// Checks that the positive-power entries are nondecreasing in gain.
/// Successive differences down to -1e-9 are accepted as floating-point ties.
inline MonotoneCheck check_monotone(const PowerPolicy& policy) {
    validate_shape(policy);
    double prev = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < policy.powers.size(); ++k) {
        const double p = policy.powers[k];
        if (p <= 0.0) continue;
        if (p < prev - 1e-9)
            return MonotoneCheck{false, static_cast<std::ptrdiff_t>(k)};
        prev = p;
    }
    return MonotoneCheck{};
}

/// True when the policy is zero below some gain threshold and strictly
/// positive from the threshold on.
inline bool has_single_threshold(const PowerPolicy& policy) {
    validate_shape(policy);
    bool seen_positive = false;
    for (const double p : policy.powers) {
        if (p > 0.0)
            seen_positive = true;
        else if (seen_positive)
            return false;
    }
    return true;
}

}  // namespace decmac
