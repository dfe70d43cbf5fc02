#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "eso/model.hpp"

namespace eso {

/// Uniform grid on [0, S*] x [t_v, T] (and [0, t_v] for the unvested stage).
struct FdGrid {
    double s_star = 30.0;
    double ds = 0.1;
    double dt = 0.1;

    void validate(double strike) const {
        if (!(ds > 0.0) || !(dt > 0.0))
            throw std::invalid_argument("FdGrid: ds and dt must be > 0");
        if (!(s_star > strike))
            throw std::invalid_argument("FdGrid: far boundary must exceed the strike");
        const double n = s_star / ds;
        if (std::fabs(n - std::round(n)) > 1e-9)
            throw std::invalid_argument("FdGrid: s_star must be an integral multiple of ds");
    }

    std::size_t n_intervals() const {
        return static_cast<std::size_t>(std::round(s_star / ds));
    }
};

/// Far-field closure at s = S*.
enum class FdBoundary {
    AnsatzDirichlet,  ///< C = A_m(t) S* - B_m(t) K from the boundary ODE pair
    ZeroGamma,        ///< second derivative forced to zero (linear extrapolation)
};

/// A_m(t), B_m(t) tabulated on the vested time grid, terminal value m.
struct BoundaryCoefficients {
    std::vector<double> t_grid;
    std::vector<std::vector<double>> A;  ///< A[m][i], m = 1..M (index 0 unused)
    std::vector<std::vector<double>> B;
};

namespace detail {

/**
 * Thomas solve of a tridiagonal system; `lower[0]` and `upper[n-1]` are
 * ignored. Diagonal dominance is the caller's responsibility (checked once
 * per solve at setup).
 */
inline void thomas_solve(const std::vector<double>& lower, const std::vector<double>& diag,
                         const std::vector<double>& upper, std::vector<double>& rhs,
                         std::vector<double>& scratch) {
    const std::size_t n = diag.size();
    scratch.resize(n);
    double piv = diag[0];
    scratch[0] = upper[0] / piv;
    rhs[0] /= piv;
    for (std::size_t i = 1; i < n; ++i) {
        piv = diag[i] - lower[i] * scratch[i - 1];
        scratch[i] = upper[i] / piv;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / piv;
    }
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= scratch[i] * rhs[i + 1];
}

}  // namespace detail

/**
 * Crank-Nicolson solver for the vested system and unvested continuation.
 *
 * Backward march in increasing m; the lower-order C^(m-z) sources enter with
 * the average of the two time levels, and lambda is evaluated at the half
 * step. The far boundary uses the ansatz Dirichlet value by default, or the
 * zero-gamma closure (default for the affine intensity, where the ansatz is
 * not exact).
 */
class FdmEngine {
public:
    FdmEngine(MarketParams market, GrantSpec grant, ExercisePolicy policy, FdGrid grid = {})
        : FdmEngine(market, grant, policy, grid,
                    policy.kind() == ExercisePolicy::Kind::Affine
                        ? FdBoundary::ZeroGamma
                        : FdBoundary::AnsatzDirichlet) {}

    FdmEngine(MarketParams market, GrantSpec grant, ExercisePolicy policy, FdGrid grid,
              FdBoundary boundary)
        : mkt_(market), grant_(grant), pol_(std::move(policy)), grid_(grid),
          boundary_(boundary) {
        mkt_.validate();
        grant_.validate(mkt_.T);
        grid_.validate(mkt_.K);
        if (grant_.M > pol_.jump_sizes().max_count())
            throw std::invalid_argument("FdmEngine: jump table smaller than grant size");
        check_diagonal_dominance();
    }

    FdBoundary boundary() const { return boundary_; }
    const FdGrid& grid() const { return grid_; }

    /**
     * Backward integration of the boundary ODE pair, increasing m, with the
     * terminal condition A_m(T) = B_m(T) = m. Classical RK4 on substeps of
     * at most 1e-3 years; the intensity is evaluated at s = S* for the
     * affine kind.
     */
    BoundaryCoefficients boundary_coefficients(const std::vector<double>& time_grid) const {
        const int M = grant_.M;
        const double x_star = std::log(grid_.s_star / mkt_.K);
        BoundaryCoefficients bc;
        bc.t_grid = time_grid;
        bc.A.assign(static_cast<std::size_t>(M) + 1, {});
        bc.B.assign(static_cast<std::size_t>(M) + 1, {});
        for (int m = 1; m <= M; ++m) {
            bc.A[static_cast<std::size_t>(m)].assign(time_grid.size(), 0.0);
            bc.B[static_cast<std::size_t>(m)].assign(time_grid.size(), 0.0);
            bc.A[static_cast<std::size_t>(m)].back() = m;
            bc.B[static_cast<std::size_t>(m)].back() = m;
        }

        std::vector<double> a(static_cast<std::size_t>(M) + 1),
            b(static_cast<std::size_t>(M) + 1);
        for (int m = 1; m <= M; ++m) {
            a[static_cast<std::size_t>(m)] = m;
            b[static_cast<std::size_t>(m)] = m;
        }

        // dA_m/dt = (q+lam+beta)A_m - lam sum p A_{m-z} - (lam pbar_m + m beta)
        // dB_m/dt = same with r in place of q.
        auto rhs = [&](double t, const std::vector<double>& av, const std::vector<double>& bv,
                       std::vector<double>& da, std::vector<double>& db) {
            const double lam = pol_.intensity(t, x_star);
            for (int m = 1; m <= M; ++m) {
                double sa = 0.0, sb = 0.0;
                for (int z = 1; z < m; ++z) {
                    const double p = pol_.jump_sizes().prob(m, z);
                    sa += p * av[static_cast<std::size_t>(m - z)];
                    sb += p * bv[static_cast<std::size_t>(m - z)];
                }
                const double src = lam * pol_.jump_sizes().expected_jump(m) + m * grant_.beta;
                da[static_cast<std::size_t>(m)] =
                    (mkt_.q + lam + grant_.beta) * av[static_cast<std::size_t>(m)] -
                    lam * sa - src;
                db[static_cast<std::size_t>(m)] =
                    (mkt_.r + lam + grant_.beta) * bv[static_cast<std::size_t>(m)] -
                    lam * sb - src;
            }
        };

        std::vector<double> k1a(a.size()), k1b(a.size()), k2a(a.size()), k2b(a.size()),
            k3a(a.size()), k3b(a.size()), k4a(a.size()), k4b(a.size()), ta(a.size()),
            tb(a.size());
        for (std::size_t i = time_grid.size() - 1; i-- > 0;) {
            const double span = time_grid[i] - time_grid[i + 1];  // negative
            const auto nsub = static_cast<std::size_t>(
                std::max(1.0, std::ceil(std::fabs(span) / 1e-3)));
            const double h = span / static_cast<double>(nsub);
            double t = time_grid[i + 1];
            for (std::size_t s = 0; s < nsub; ++s) {
                rhs(t, a, b, k1a, k1b);
                axpy(ta, a, k1a, 0.5 * h); axpy(tb, b, k1b, 0.5 * h);
                rhs(t + 0.5 * h, ta, tb, k2a, k2b);
                axpy(ta, a, k2a, 0.5 * h); axpy(tb, b, k2b, 0.5 * h);
                rhs(t + 0.5 * h, ta, tb, k3a, k3b);
                axpy(ta, a, k3a, h); axpy(tb, b, k3b, h);
                rhs(t + h, ta, tb, k4a, k4b);
                for (std::size_t m = 1; m < a.size(); ++m) {
                    a[m] += h / 6.0 * (k1a[m] + 2.0 * k2a[m] + 2.0 * k3a[m] + k4a[m]);
                    b[m] += h / 6.0 * (k1b[m] + 2.0 * k2b[m] + 2.0 * k3b[m] + k4b[m]);
                }
                t += h;
            }
            for (int m = 1; m <= M; ++m) {
                bc.A[static_cast<std::size_t>(m)][i] = a[static_cast<std::size_t>(m)];
                bc.B[static_cast<std::size_t>(m)][i] = b[static_cast<std::size_t>(m)];
            }
        }
        return bc;
    }

    /// Vested Crank-Nicolson march on [t_v, T]; records the requested levels
    /// (default: the slice at t_v).
    CostSurface solve_vested_cn(std::vector<double> record_times = {}) const {
        if (record_times.empty()) record_times = {grant_.t_v};
        const double span = mkt_.T - grant_.t_v;
        const auto n_steps = static_cast<std::size_t>(
            std::max(0.0, std::round(span / grid_.dt)));
        const double dt = n_steps ? span / static_cast<double>(n_steps) : 0.0;

        std::vector<double> t_grid(n_steps + 1);
        for (std::size_t i = 0; i <= n_steps; ++i)
            t_grid[i] = grant_.t_v + dt * static_cast<double>(i);
        t_grid.back() = mkt_.T;
        for (double t : record_times) {
            const double steps = n_steps ? (t - grant_.t_v) / dt : 0.0;
            if (std::fabs(steps - std::round(steps)) > 1e-6)
                throw std::domain_error(
                    "FdmEngine: record time must coincide with a time-step level");
        }

        BoundaryCoefficients bc;
        if (boundary_ == FdBoundary::AnsatzDirichlet) bc = boundary_coefficients(t_grid);

        const std::size_t n0 = grid_.n_intervals();
        const int M = grant_.M;
        CostSurface surf = make_surface(record_times, grant_.t_v, mkt_.T);

        // Terminal condition m (s-K)^+.
        std::vector<std::vector<double>> cur(static_cast<std::size_t>(M) + 1),
            nxt(static_cast<std::size_t>(M) + 1);
        for (int m = 1; m <= M; ++m) {
            cur[static_cast<std::size_t>(m)].resize(n0 + 1);
            nxt[static_cast<std::size_t>(m)].resize(n0 + 1);
            for (std::size_t j = 0; j <= n0; ++j)
                cur[static_cast<std::size_t>(m)][j] =
                    m * call_payoff(static_cast<double>(j) * grid_.ds, mkt_.K);
        }
        record_levels(surf, cur, mkt_.T);

        std::vector<double> lo(n0 - 1), di(n0 - 1), up(n0 - 1), rhsv(n0 - 1), scratch;
        std::vector<double> lamj(n0 - 1), payoff(n0 + 1);
        for (std::size_t j = 0; j <= n0; ++j)
            payoff[j] = call_payoff(static_cast<double>(j) * grid_.ds, mkt_.K);

        for (std::size_t i = n_steps; i-- > 0;) {
            const double t_new = t_grid[i];
            const double t_half = t_new + 0.5 * dt;
            for (std::size_t j = 1; j < n0; ++j) {
                const double s = static_cast<double>(j) * grid_.ds;
                lamj[j - 1] = pol_.intensity(t_half, std::log(s / mkt_.K));
            }
            for (int m = 1; m <= M; ++m) {
                const double pbar = pol_.jump_sizes().expected_jump(m);
                const auto& old = cur[static_cast<std::size_t>(m)];
                auto& out = nxt[static_cast<std::size_t>(m)];
                for (std::size_t j = 1; j < n0; ++j) {
                    const double s = static_cast<double>(j) * grid_.ds;
                    const double drift = (mkt_.r - mkt_.q) * s / (2.0 * grid_.ds);
                    const double diff =
                        0.5 * mkt_.sigma * mkt_.sigma * s * s / (grid_.ds * grid_.ds);
                    const double a_c = diff - drift;
                    const double b_c = -2.0 * diff - (mkt_.r + lamj[j - 1] + grant_.beta);
                    const double c_c = diff + drift;

                    double mix = 0.0;
                    for (int z = 1; z < m; ++z) {
                        const double p = pol_.jump_sizes().prob(m, z);
                        if (p == 0.0) continue;
                        mix += p * 0.5 *
                               (cur[static_cast<std::size_t>(m - z)][j] +
                                nxt[static_cast<std::size_t>(m - z)][j]);
                    }
                    const double src =
                        lamj[j - 1] * (mix + pbar * payoff[j]) + m * grant_.beta * payoff[j];

                    lo[j - 1] = -0.5 * a_c;
                    di[j - 1] = 1.0 / dt - 0.5 * b_c;
                    up[j - 1] = -0.5 * c_c;
                    rhsv[j - 1] = (1.0 / dt + 0.5 * b_c) * old[j] + 0.5 * a_c * old[j - 1] +
                                  0.5 * c_c * old[j + 1] + src;
                }
                double bc_right = 0.0;
                if (boundary_ == FdBoundary::AnsatzDirichlet) {
                    bc_right = bc.A[static_cast<std::size_t>(m)][i] * grid_.s_star -
                               bc.B[static_cast<std::size_t>(m)][i] * mkt_.K;
                    rhsv[n0 - 2] += -up[n0 - 2] * bc_right;
                } else {
                    // C_{N} = 2 C_{N-1} - C_{N-2} folded into the last row.
                    di[n0 - 2] += 2.0 * up[n0 - 2];
                    lo[n0 - 2] += -up[n0 - 2];
                }
                detail::thomas_solve(lo, di, up, rhsv, scratch);
                out[0] = 0.0;
                for (std::size_t j = 1; j < n0; ++j) out[j] = rhsv[j - 1];
                out[n0] = boundary_ == FdBoundary::AnsatzDirichlet
                              ? bc_right
                              : 2.0 * out[n0 - 1] - out[n0 - 2];
            }
            std::swap(cur, nxt);
            record_levels(surf, cur, t_new);
        }
        return surf;
    }

    /**
     * Unvested continuation on [0, t_v): the (r+alpha)-discounted diffusion
     * with the vested t_v slice as terminal data. Far field per the ansatz
     * with the pre-vesting discounting applied, or zero-gamma when that
     * closure is selected.
     */
    CostSurface solve_unvested_cn(const CostSurface& vested,
                                  std::vector<double> record_times = {}) const {
        if (grant_.t_v == 0.0) return vested;
        if (vested.kind != CostSurface::SpaceKind::Spot ||
            vested.n_space() != grid_.n_intervals() + 1)
            throw std::invalid_argument("solve_unvested_cn: surface grid mismatch");
        if (record_times.empty()) record_times = {0.0};
        const std::size_t tv_idx = vested.time_index(grant_.t_v);

        const auto n_steps = static_cast<std::size_t>(
            std::max(1.0, std::round(grant_.t_v / grid_.dt)));
        const double dt = grant_.t_v / static_cast<double>(n_steps);
        const std::size_t n0 = grid_.n_intervals();
        const int M = grant_.M;

        double a_tv = 0.0, b_tv = 0.0;
        std::vector<double> a_all(static_cast<std::size_t>(M) + 1),
            b_all(static_cast<std::size_t>(M) + 1);
        if (boundary_ == FdBoundary::AnsatzDirichlet) {
            BoundaryCoefficients bc = boundary_coefficients({grant_.t_v, mkt_.T});
            for (int m = 1; m <= M; ++m) {
                a_all[static_cast<std::size_t>(m)] = bc.A[static_cast<std::size_t>(m)][0];
                b_all[static_cast<std::size_t>(m)] = bc.B[static_cast<std::size_t>(m)][0];
            }
        }

        CostSurface surf = make_surface(record_times, 0.0, grant_.t_v);
        std::vector<std::vector<double>> cur(static_cast<std::size_t>(M) + 1),
            nxt(static_cast<std::size_t>(M) + 1);
        for (int m = 1; m <= M; ++m) {
            cur[static_cast<std::size_t>(m)].resize(n0 + 1);
            nxt[static_cast<std::size_t>(m)].resize(n0 + 1);
            for (std::size_t j = 0; j <= n0; ++j)
                cur[static_cast<std::size_t>(m)][j] = vested.at(m, tv_idx, j);
        }
        record_levels(surf, cur, grant_.t_v);

        std::vector<double> lo(n0 - 1), di(n0 - 1), up(n0 - 1), rhsv(n0 - 1), scratch;
        for (std::size_t i = n_steps; i-- > 0;) {
            const double t_new = dt * static_cast<double>(i);
            for (int m = 1; m <= M; ++m) {
                a_tv = a_all[static_cast<std::size_t>(m)];
                b_tv = b_all[static_cast<std::size_t>(m)];
                const auto& old = cur[static_cast<std::size_t>(m)];
                auto& out = nxt[static_cast<std::size_t>(m)];
                for (std::size_t j = 1; j < n0; ++j) {
                    const double s = static_cast<double>(j) * grid_.ds;
                    const double drift = (mkt_.r - mkt_.q) * s / (2.0 * grid_.ds);
                    const double diff =
                        0.5 * mkt_.sigma * mkt_.sigma * s * s / (grid_.ds * grid_.ds);
                    const double a_c = diff - drift;
                    const double b_c = -2.0 * diff - (mkt_.r + grant_.alpha);
                    const double c_c = diff + drift;
                    lo[j - 1] = -0.5 * a_c;
                    di[j - 1] = 1.0 / dt - 0.5 * b_c;
                    up[j - 1] = -0.5 * c_c;
                    rhsv[j - 1] = (1.0 / dt + 0.5 * b_c) * old[j] + 0.5 * a_c * old[j - 1] +
                                  0.5 * c_c * old[j + 1];
                }
                double bc_right = 0.0;
                if (boundary_ == FdBoundary::AnsatzDirichlet) {
                    const double span = grant_.t_v - t_new;
                    bc_right = std::exp(-(mkt_.q + grant_.alpha) * span) * a_tv * grid_.s_star -
                               std::exp(-(mkt_.r + grant_.alpha) * span) * b_tv * mkt_.K;
                    rhsv[n0 - 2] += -up[n0 - 2] * bc_right;
                } else {
                    di[n0 - 2] += 2.0 * up[n0 - 2];
                    lo[n0 - 2] += -up[n0 - 2];
                }
                detail::thomas_solve(lo, di, up, rhsv, scratch);
                out[0] = 0.0;
                for (std::size_t j = 1; j < n0; ++j) out[j] = rhsv[j - 1];
                out[n0] = boundary_ == FdBoundary::AnsatzDirichlet
                              ? bc_right
                              : 2.0 * out[n0 - 1] - out[n0 - 2];
            }
            std::swap(cur, nxt);
            record_levels(surf, cur, t_new);
        }
        return surf;
    }

    /// Grant cost C^(M)(0, S0) through the vested + unvested stages.
    double price() const {
        CostSurface vested = solve_vested_cn({grant_.t_v});
        if (grant_.t_v == 0.0) return vested.value_at(grant_.M, 0, mkt_.S0);
        CostSurface unvested = solve_unvested_cn(vested, {0.0});
        return unvested.value_at(grant_.M, 0, mkt_.S0);
    }

private:
    static void axpy(std::vector<double>& out, const std::vector<double>& base,
                     const std::vector<double>& k, double h) {
        out.resize(base.size());
        for (std::size_t i = 0; i < base.size(); ++i) out[i] = base[i] + h * k[i];
    }

    /// Row-wise dominance of the implicit matrix; lambda only adds to the
    /// diagonal, so checking at lambda = 0 covers every step.
    void check_diagonal_dominance() const {
        const std::size_t n0 = grid_.n_intervals();
        for (std::size_t j = 1; j < n0; ++j) {
            const double s = static_cast<double>(j) * grid_.ds;
            const double drift = (mkt_.r - mkt_.q) * s / (2.0 * grid_.ds);
            const double diff = 0.5 * mkt_.sigma * mkt_.sigma * s * s / (grid_.ds * grid_.ds);
            const double diag = 1.0 / grid_.dt + diff + 0.5 * (mkt_.r + grant_.beta);
            const double off = 0.5 * (std::fabs(diff - drift) + std::fabs(diff + drift));
            if (diag < off)
                throw std::invalid_argument(
                    "FdmEngine: tridiagonal system not diagonally dominant at s=" +
                    std::to_string(s) + "; refine the grid");
        }
    }

    CostSurface make_surface(std::vector<double>& record_times, double lo, double hi) const {
        for (double t : record_times)
            if (t < lo - 1e-9 || t > hi + 1e-9)
                throw std::domain_error("FdmEngine: record time outside the stage interval");
        std::sort(record_times.begin(), record_times.end());
        const std::size_t n0 = grid_.n_intervals();
        CostSurface surf;
        surf.m_max = grant_.M;
        surf.strike = mkt_.K;
        surf.kind = CostSurface::SpaceKind::Spot;
        surf.times = record_times;
        surf.coords.resize(n0 + 1);
        for (std::size_t j = 0; j <= n0; ++j)
            surf.coords[j] = static_cast<double>(j) * grid_.ds;
        surf.values.resize(static_cast<std::size_t>(grant_.M) * record_times.size() *
                           (n0 + 1));
        return surf;
    }

    void record_levels(CostSurface& surf, const std::vector<std::vector<double>>& cur,
                       double t) const {
        for (std::size_t ti = 0; ti < surf.times.size(); ++ti) {
            if (std::fabs(surf.times[ti] - t) > 1e-9) continue;
            for (int m = 1; m <= grant_.M; ++m)
                for (std::size_t j = 0; j < surf.n_space(); ++j)
                    surf.at(m, ti, j) = cur[static_cast<std::size_t>(m)][j];
        }
    }

    MarketParams mkt_;
    GrantSpec grant_;
    ExercisePolicy pol_;
    FdGrid grid_;
    FdBoundary boundary_;
};

}  // namespace eso
