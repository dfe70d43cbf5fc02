#pragma once

#include <cmath>
#include <stdexcept>

#include "eso/math.hpp"

namespace eso {

/**
 * Dividend-adjusted Black-Scholes call value. Serves as the degenerate-case
 * oracle for every solver in the library, so the CDF path must be more
 * accurate than any of them (see norm_cdf).
 *
 * tau = 0 returns the payoff; S = 0 is the absorbed state.
 */
inline double bs_call(double S, double K, double r, double q, double sigma, double tau) {
    if (!(K > 0.0)) throw std::invalid_argument("bs_call: K must be > 0");
    if (!(sigma > 0.0)) throw std::invalid_argument("bs_call: sigma must be > 0");
    if (tau < 0.0) throw std::domain_error("bs_call: negative time to maturity");
    if (tau == 0.0 || S <= 0.0) return pos_part(S - K);
    const double vol = sigma * std::sqrt(tau);
    const double d1 = (std::log(S / K) + (r - q + 0.5 * sigma * sigma) * tau) / vol;
    const double d2 = d1 - vol;
    return S * std::exp(-q * tau) * norm_cdf(d1) - K * std::exp(-r * tau) * norm_cdf(d2);
}

}  // namespace eso
