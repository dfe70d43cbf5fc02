#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "eso/fft_engine.hpp"
#include "eso/model.hpp"

namespace eso {

/**
 * Closed-form coefficients of the randomized-maturity vested solution:
 * piecewise A_m s + B_m K + sum_n E_{m,n} ln^n(s/K) (s/K)^{gamma-theta} above
 * the strike, sum_n F_{m,n} ln^n(s/K) (s/K)^{gamma+theta} below. Recursion is
 * accumulated in extended precision; the log-power ladders grow factorially
 * with m.
 */
struct MrCoefficients {
    int m_max = 0;
    double strike = 0.0;
    double lambda = 0.0;
    double beta = 0.0;
    double kappa = 0.0;
    double a0 = 0.0, a1 = 0.0, a2 = 0.0;
    double gamma = 0.0, theta = 0.0;
    std::vector<long double> A, B;                ///< index m (0 unused)
    std::vector<std::vector<long double>> E, F;   ///< [m][n], n = 0..m-1
};

/// Tilde coefficients for the exponential-vesting unvested extension.
struct MrTildeCoefficients {
    double alpha = 0.0;
    double kappa_tilde = 0.0;
    double gamma_t = 0.0, theta_t = 0.0;
    double R = 0.0;
    std::vector<long double> At, Bt;
    std::vector<std::vector<long double>> Et, Ft;
    std::vector<long double> Em, Fm;              ///< homogeneous exponent terms
};

inline MrCoefficients mr_coefficients(const MarketParams& mkt, const GrantSpec& grant,
                                      const ExercisePolicy& policy, double kappa) {
    mkt.validate();
    grant.validate(mkt.T);
    if (!(kappa > 0.0)) throw std::domain_error("mr_coefficients: kappa must be > 0");
    const double lam = policy.constant_lambda();
    const auto& jumps = policy.jump_sizes();
    if (grant.M > jumps.max_count())
        throw std::invalid_argument("mr_coefficients: jump table smaller than grant size");

    MrCoefficients co;
    co.m_max = grant.M;
    co.strike = mkt.K;
    co.lambda = lam;
    co.beta = grant.beta;
    co.kappa = kappa;
    co.a0 = -(mkt.r + lam + grant.beta + kappa);
    co.a1 = mkt.r - mkt.q;
    co.a2 = 0.5 * mkt.sigma * mkt.sigma;
    co.gamma = 0.5 - (mkt.r - mkt.q) / (mkt.sigma * mkt.sigma);
    co.theta = std::sqrt(co.gamma * co.gamma +
                         2.0 * (mkt.r + lam + grant.beta + kappa) /
                             (mkt.sigma * mkt.sigma));

    // Resonance denominators; algebraically these equal -/+ sigma^2 theta.
    const long double den_e = co.a1 + 2.0 * co.a2 * (co.gamma - co.theta) - co.a2;
    const long double den_f = co.a1 + 2.0 * co.a2 * (co.gamma + co.theta) - co.a2;
    if (std::fabs(static_cast<double>(den_e)) < 1e-14 ||
        std::fabs(static_cast<double>(den_f)) < 1e-14)
        throw std::domain_error(
            "mr_coefficients: degenerate parameters, a1 + 2 a2 (gamma -/+ theta) - a2 = 0");

    const int M = grant.M;
    const long double K = mkt.K;
    const long double th2 = 2.0L * static_cast<long double>(co.theta);
    co.A.assign(static_cast<std::size_t>(M) + 1, 0.0L);
    co.B.assign(static_cast<std::size_t>(M) + 1, 0.0L);
    co.E.assign(static_cast<std::size_t>(M) + 1, {});
    co.F.assign(static_cast<std::size_t>(M) + 1, {});

    for (int m = 1; m <= M; ++m) {
        const auto mm = static_cast<std::size_t>(m);
        const long double g = lam * jumps.expected_jump(m) + m * (grant.beta + kappa);
        long double sa = 0.0L, sb = 0.0L;
        for (int z = 1; z < m; ++z) {
            const long double p = jumps.prob(m, z);
            sa += p * co.A[static_cast<std::size_t>(m - z)];
            sb += p * co.B[static_cast<std::size_t>(m - z)];
        }
        co.A[mm] = (-lam * sa - g) / (co.a1 + co.a0);
        co.B[mm] = (-lam * sb + g) / co.a0;

        co.E[mm].assign(mm, 0.0L);
        co.F[mm].assign(mm, 0.0L);
        if (m == 1) {
            co.E[1] = {-((co.A[1] + co.B[1]) * K * (co.gamma + co.theta) - co.A[1] * K) / th2};
            co.F[1] = {-((co.A[1] + co.B[1]) * K * (co.gamma - co.theta) - co.A[1] * K) / th2};
            continue;
        }
        co.E[mm][mm - 1] = -lam * jumps.prob(m, 1) * co.E[mm - 1][mm - 2] /
                           ((m - 1) * den_e);
        co.F[mm][mm - 1] = -lam * jumps.prob(m, 1) * co.F[mm - 1][mm - 2] /
                           ((m - 1) * den_f);
        for (int n = m - 2; n >= 1; --n) {
            const auto nn = static_cast<std::size_t>(n);
            long double se = 0.0L, sf = 0.0L;
            for (int z = 1; z <= m - n; ++z) {
                const long double p = jumps.prob(m, z);
                se += p * co.E[static_cast<std::size_t>(m - z)][nn - 1];
                sf += p * co.F[static_cast<std::size_t>(m - z)][nn - 1];
            }
            co.E[mm][nn] = -(lam * se + (n + 1) * n * co.a2 * co.E[mm][nn + 1]) / (n * den_e);
            co.F[mm][nn] = -(lam * sf + (n + 1) * n * co.a2 * co.F[mm][nn + 1]) / (n * den_f);
        }
        co.E[mm][0] = -((co.A[mm] + co.B[mm]) * K * (co.gamma + co.theta) - co.A[mm] * K +
                        co.F[mm][1] - co.E[mm][1]) / th2;
        co.F[mm][0] = -((co.A[mm] + co.B[mm]) * K * (co.gamma - co.theta) - co.A[mm] * K +
                        co.F[mm][1] - co.E[mm][1]) / th2;
    }
    return co;
}

struct MrValue {
    double value = 0.0;
    double d1 = 0.0;  ///< dC/ds
    double d2 = 0.0;  ///< d2C/ds2
};

namespace detail {

/// Evaluate sum_n c_n u^n y^rho and its first two s-derivatives at y = s/K.
inline MrValue log_power_series(const std::vector<long double>& c, long double rho,
                                double s, double strike) {
    const long double y = static_cast<long double>(s) / strike;
    const long double u = std::log(y);
    const long double yr = std::pow(y, rho);
    long double v = 0.0L, dv = 0.0L, d2v = 0.0L;
    long double un = 1.0L;        // u^n
    long double unm1 = 0.0L;      // u^{n-1} (n=0 term vanishes with the factor n)
    long double unm2 = 0.0L;
    for (std::size_t n = 0; n < c.size(); ++n) {
        const auto nf = static_cast<long double>(n);
        v += c[n] * un;
        dv += c[n] * (nf * unm1 + rho * un);
        d2v += c[n] * (nf * (nf - 1.0L) * unm2 + (2.0L * rho - 1.0L) * nf * unm1 +
                       (rho * rho - rho) * un);
        unm2 = unm1;
        unm1 = un;
        un *= u;
    }
    MrValue out;
    const long double s_ld = s;
    out.value = static_cast<double>(v * yr);
    out.d1 = static_cast<double>(dv * yr / s_ld);
    out.d2 = static_cast<double>(d2v * yr / (s_ld * s_ld));
    return out;
}

}  // namespace detail

/// Vested randomized-maturity cost with exact first and second derivatives.
inline MrValue mr_vested_value(const MrCoefficients& co, double s, int m) {
    if (m < 1 || m > co.m_max) throw std::domain_error("mr_vested_value: m out of range");
    if (s <= 0.0) return {};
    const auto mm = static_cast<std::size_t>(m);
    if (s > co.strike) {
        MrValue out = detail::log_power_series(co.E[mm], co.gamma - co.theta, s, co.strike);
        out.value += static_cast<double>(co.A[mm] * s + co.B[mm] * co.strike);
        out.d1 += static_cast<double>(co.A[mm]);
        return out;
    }
    return detail::log_power_series(co.F[mm], co.gamma + co.theta, s, co.strike);
}

inline double mr_vested_cost(const MrCoefficients& co, double s, int m) {
    return mr_vested_value(co, s, m).value;
}

inline MrTildeCoefficients mr_tilde_coefficients(const MrCoefficients& co,
                                                 const MarketParams& mkt,
                                                 const GrantSpec& grant,
                                                 double kappa_tilde) {
    if (!(kappa_tilde > 0.0))
        throw std::domain_error("mr_tilde_coefficients: kappa_tilde must be > 0");
    MrTildeCoefficients tc;
    tc.alpha = grant.alpha;
    tc.kappa_tilde = kappa_tilde;
    tc.gamma_t = co.gamma;
    tc.theta_t = std::sqrt(co.gamma * co.gamma +
                           2.0 * (mkt.r + grant.alpha + kappa_tilde) /
                               (mkt.sigma * mkt.sigma));
    tc.R = co.lambda + co.beta + co.kappa - grant.alpha - kappa_tilde;
    if (std::fabs(tc.R) < 1e-12)
        throw std::domain_error(
            "mr_tilde_coefficients: requires lambda + beta + kappa != alpha + kappa_tilde");

    const long double P1 = mkt.r - mkt.q +
                           mkt.sigma * mkt.sigma * (2.0 * co.gamma - 2.0 * co.theta - 1.0) / 2.0;
    const long double Q1 = mkt.r - mkt.q +
                           mkt.sigma * mkt.sigma * (2.0 * co.gamma + 2.0 * co.theta - 1.0) / 2.0;
    const long double kt = kappa_tilde;
    const long double R = tc.R;
    const long double K = co.strike;
    const int M = co.m_max;

    tc.At.assign(static_cast<std::size_t>(M) + 1, 0.0L);
    tc.Bt.assign(static_cast<std::size_t>(M) + 1, 0.0L);
    tc.Et.assign(static_cast<std::size_t>(M) + 1, {});
    tc.Ft.assign(static_cast<std::size_t>(M) + 1, {});
    tc.Em.assign(static_cast<std::size_t>(M) + 1, 0.0L);
    tc.Fm.assign(static_cast<std::size_t>(M) + 1, 0.0L);

    for (int m = 1; m <= M; ++m) {
        const auto mm = static_cast<std::size_t>(m);
        tc.At[mm] = kt * co.A[mm] / (mkt.q + grant.alpha + kappa_tilde);
        tc.Bt[mm] = kt * co.B[mm] / (mkt.r + grant.alpha + kappa_tilde);
        // Two sentinel zeros past the top power keep one recurrence for all n.
        std::vector<long double> et(mm + 2, 0.0L), ft(mm + 2, 0.0L);
        for (int n = m - 1; n >= 0; --n) {
            const auto nn = static_cast<std::size_t>(n);
            et[nn] = -(kt * co.E[mm][nn] + (n + 1) * P1 * et[nn + 1] +
                       co.a2 * (n + 2) * (n + 1) * et[nn + 2]) / R;
            ft[nn] = -(kt * co.F[mm][nn] + (n + 1) * Q1 * ft[nn + 1] +
                       co.a2 * (n + 2) * (n + 1) * ft[nn + 2]) / R;
        }
        et.resize(mm);
        ft.resize(mm);
        tc.Et[mm] = std::move(et);
        tc.Ft[mm] = std::move(ft);

        const long double e1 = (m >= 2) ? tc.Et[mm][1] : 0.0L;
        const long double f1 = (m >= 2) ? tc.Ft[mm][1] : 0.0L;
        const long double P = tc.Ft[mm][0] - tc.Et[mm][0] - K * tc.At[mm] - K * tc.Bt[mm];
        const long double Q = (co.gamma + co.theta) * tc.Ft[mm][0] -
                              (co.gamma - co.theta) * tc.Et[mm][0] - K * tc.At[mm] + f1 - e1;
        tc.Em[mm] = ((tc.gamma_t + tc.theta_t) * P - Q) / (2.0L * tc.theta_t);
        tc.Fm[mm] = ((tc.gamma_t - tc.theta_t) * P - Q) / (2.0L * tc.theta_t);
    }
    return tc;
}

/// Unvested cost under exponential vesting, with exact derivatives.
inline MrValue mr_unvested_value(const MrCoefficients& co, const MrTildeCoefficients& tc,
                                 double s, int m) {
    if (m < 1 || m > co.m_max) throw std::domain_error("mr_unvested_value: m out of range");
    if (s <= 0.0) return {};
    const auto mm = static_cast<std::size_t>(m);
    if (s > co.strike) {
        MrValue out = detail::log_power_series(tc.Et[mm], co.gamma - co.theta, s, co.strike);
        const MrValue hom = detail::log_power_series({tc.Em[mm]}, tc.gamma_t - tc.theta_t,
                                                     s, co.strike);
        out.value += static_cast<double>(tc.At[mm] * s + tc.Bt[mm] * co.strike) + hom.value;
        out.d1 += static_cast<double>(tc.At[mm]) + hom.d1;
        out.d2 += hom.d2;
        return out;
    }
    MrValue out = detail::log_power_series(tc.Ft[mm], co.gamma + co.theta, s, co.strike);
    const MrValue hom = detail::log_power_series({tc.Fm[mm]}, tc.gamma_t + tc.theta_t,
                                                 s, co.strike);
    out.value += hom.value;
    out.d1 += hom.d1;
    out.d2 += hom.d2;
    return out;
}

/// Convenience overload deriving the tilde coefficients on the fly.
inline double mr_unvested_cost(const MrCoefficients& co, const MarketParams& mkt,
                               const GrantSpec& grant, double kappa, double kappa_tilde,
                               double s, int m) {
    if (std::fabs(kappa - co.kappa) > 1e-12)
        throw std::invalid_argument("mr_unvested_cost: kappa mismatch with coefficients");
    const MrTildeCoefficients tc = mr_tilde_coefficients(co, mkt, grant, kappa_tilde);
    return mr_unvested_value(co, tc, s, m).value;
}

/**
 * Full randomized-maturity grant cost at S0 with the library's kappa
 * conventions: kappa = 1/(T - t_v); t_v = 0 bypasses the unvested stage,
 * otherwise kappa_tilde = 1/t_v.
 */
inline double mr_price(const MarketParams& mkt, const GrantSpec& grant,
                       const ExercisePolicy& policy) {
    const double kappa = 1.0 / (mkt.T - grant.t_v);
    const MrCoefficients co = mr_coefficients(mkt, grant, policy, kappa);
    if (grant.t_v == 0.0) return mr_vested_cost(co, mkt.S0, grant.M);
    const MrTildeCoefficients tc =
        mr_tilde_coefficients(co, mkt, grant, 1.0 / grant.t_v);
    return mr_unvested_value(co, tc, mkt.S0, grant.M).value;
}

struct MrErrorRow {
    double sweep_value = 0.0;
    double mr_price = 0.0;
    double fft_price = 0.0;
    double abs_error = 0.0;
    double per_unit_error = 0.0;
};

enum class MrSweep { Lambda, Beta };

/**
 * |MR - FFT| at S0 over an intensity or termination-rate sweep, with
 * kappa = 1/(T - t_v). The FFT side solves the finite-maturity problem on
 * its default grid.
 */
inline std::vector<MrErrorRow> mr_error_curve(const MarketParams& mkt,
                                              const GrantSpec& grant,
                                              const ExercisePolicy& policy,
                                              const std::vector<double>& sweep,
                                              MrSweep kind) {
    std::vector<MrErrorRow> rows;
    rows.reserve(sweep.size());
    for (double v : sweep) {
        GrantSpec g = grant;
        ExercisePolicy pol = policy;
        if (kind == MrSweep::Lambda)
            pol = ExercisePolicy::constant(v, policy.jump_sizes());
        else
            g.beta = v;
        MrErrorRow row;
        row.sweep_value = v;
        row.mr_price = mr_price(mkt, g, pol);
        row.fft_price = FftEngine(mkt, g, pol).price();
        row.abs_error = std::fabs(row.mr_price - row.fft_price);
        row.per_unit_error = row.abs_error / static_cast<double>(g.M);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace eso
