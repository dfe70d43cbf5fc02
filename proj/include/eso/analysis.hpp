#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "eso/black_scholes.hpp"
#include "eso/fdm_engine.hpp"
#include "eso/fft_engine.hpp"
#include "eso/matrand.hpp"
#include "eso/model.hpp"
#include "eso/simulation.hpp"

namespace eso {

struct ImpliedMaturityResult {
    double t_tilde = 0.0;
    double residual = 0.0;
    double bracket_lo = 0.0;
    double bracket_hi = 0.0;
    bool converged = false;
    bool multiple_roots = false;
};

/**
 * Implied maturity: the Black-Scholes maturity whose call value equals the
 * per-unit cost. Bracketed bisection on [1e-8, 50] years; with q > 0 the
 * call value need not be monotone in maturity, so the scan counts sign
 * changes, returns the smallest root, and flags multiplicity. Targets in
 * the sliver below bs_call(1e-8) return the bracket edge unconverged.
 */
inline ImpliedMaturityResult implied_maturity(double per_unit_cost,
                                              const MarketParams& mkt) {
    mkt.validate();
    constexpr double kLo = 1e-8, kHi = 50.0;
    constexpr int kScan = 4000, kMaxIter = 200;

    auto value = [&](double tau) {
        return bs_call(mkt.S0, mkt.K, mkt.r, mkt.q, mkt.sigma, tau);
    };
    const double v_lo = value(kLo);
    double v_max = v_lo;
    for (int i = 0; i <= kScan; ++i)
        v_max = std::max(v_max, value(kLo + (kHi - kLo) * i / kScan));
    const double intrinsic = pos_part(mkt.S0 - mkt.K);
    if (!(per_unit_cost > 0.0) || per_unit_cost < intrinsic || per_unit_cost > v_max)
        throw std::domain_error(
            "implied_maturity: per-unit cost " + std::to_string(per_unit_cost) +
            " outside the attainable range (" + std::to_string(std::max(intrinsic, 0.0)) +
            ", " + std::to_string(v_max) + "]");

    ImpliedMaturityResult res;
    res.bracket_lo = kLo;
    res.bracket_hi = kHi;
    if (per_unit_cost <= v_lo) {
        res.t_tilde = kLo;
        res.residual = std::fabs(v_lo - per_unit_cost);
        res.converged = false;
        return res;
    }

    int sign_changes = 0;
    double lo = kLo, hi = kHi;
    double f_prev = v_lo - per_unit_cost;
    bool found = false;
    for (int i = 1; i <= kScan; ++i) {
        const double tau = kLo + (kHi - kLo) * i / kScan;
        const double f = value(tau) - per_unit_cost;
        if ((f_prev < 0.0) != (f < 0.0)) {
            ++sign_changes;
            if (!found) {
                lo = kLo + (kHi - kLo) * (i - 1) / kScan;
                hi = tau;
                found = true;
            }
        }
        f_prev = f;
    }
    res.multiple_roots = sign_changes > 1;
    if (!found) {
        // Attainable but not crossed on the scan: target sits at the peak.
        res.t_tilde = kHi;
        res.residual = std::fabs(value(kHi) - per_unit_cost);
        res.converged = res.residual <= 1e-8;
        return res;
    }

    double f_lo = value(lo) - per_unit_cost;
    for (int it = 0; it < kMaxIter; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double f_mid = value(mid) - per_unit_cost;
        if ((f_lo < 0.0) == (f_mid < 0.0)) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
        if (std::fabs(f_mid) <= 1e-10 && hi - lo <= 1e-12) break;
    }
    res.t_tilde = 0.5 * (lo + hi);
    res.residual = std::fabs(value(res.t_tilde) - per_unit_cost);
    res.converged = res.residual <= 1e-8;
    return res;
}

// ---------------------------------------------------------------------------
// Benchmark-table reproduction
// ---------------------------------------------------------------------------

struct TableCell {
    double alpha;
    double beta;
    double lambda;       ///< constant rate, or A for the affine block
    bool affine;         ///< true: lambda(s) = lambda - affine_b ln(s/K)
    double affine_b;
    double t_v;
    double ref_fdm;
    double ref_fft;
};

/// Reference cells of the two benchmark comparison tables (common parameters: S0=K=10,
/// r=5%, q=1.5%, sigma=20%, uniform jumps, M=5, T=10).
inline std::vector<TableCell> table_cells(int table_id) {
    std::vector<TableCell> cells;
    if (table_id == 1) {
        struct Row { double alpha, beta, lambda; double v[6]; };
        const Row rows[] = {
            {0.1, 0.0, 1.0, {5.4729, 5.4753, 7.8399, 7.8405, 8.2845, 8.2849}},
            {0.1, 0.0, 2.0, {3.7067, 3.7101, 6.9164, 6.9170, 7.7054, 7.7058}},
            {0.1, 1.0, 1.0, {3.2483, 3.2522, 6.7063, 6.7069, 7.5746, 7.5750}},
            {0.1, 1.0, 2.0, {2.7024, 2.7069, 6.4655, 6.4661, 7.4253, 7.4257}},
            {0.0, 0.1, 1.0, {5.0603, 5.0629, 9.3022, 9.3031, 12.1510, 12.1517}},
            {0.0, 0.1, 2.0, {3.5595, 3.5630, 8.3622, 8.3631, 11.4298, 11.4306}},
            {1.0, 0.1, 1.0, {5.0603, 5.0629, 1.2579, 1.2590, 0.2219, 0.2226}},
            {1.0, 0.1, 2.0, {3.5595, 3.5630, 1.1310, 1.1318, 0.2087, 0.2094}},
        };
        const double tvs[] = {0.0, 2.0, 4.0};
        for (const auto& r : rows)
            for (int k = 0; k < 3; ++k)
                cells.push_back({r.alpha, r.beta, r.lambda, false, 0.0, tvs[k],
                                 r.v[2 * k], r.v[2 * k + 1]});
    } else if (table_id == 2) {
        struct Row { double beta, alpha; double v[6]; };
        const Row const_rows[] = {
            {0.0, 0.0, {12.8052, 12.8065, 13.7122, 13.7134, 15.0953, 15.0967}},
            {0.0, 0.1, {11.5867, 11.5878, 11.2266, 11.2276, 10.1187, 10.1196}},
            {0.5, 0.0, {7.8849, 7.8859, 9.6380, 9.6388, 12.4022, 12.4029}},
            {0.5, 0.1, {7.1347, 7.1355, 7.8910, 7.8916, 8.3135, 8.3139}},
        };
        const Row affine_rows[] = {
            {0.0, 0.0, {12.8310, 12.8379, 13.7364, 13.7445, 15.1130, 15.1235}},
            {0.0, 0.1, {11.6099, 11.6163, 11.2464, 11.2531, 10.1305, 10.1376}},
            {0.5, 0.0, {7.8895, 7.8887, 9.6428, 9.6423, 12.4068, 12.4076}},
            {0.5, 0.1, {7.1387, 7.1381, 7.8948, 7.8946, 8.3165, 8.3172}},
        };
        const double tvs[] = {1.0, 2.0, 4.0};
        for (const auto& r : const_rows)
            for (int k = 0; k < 3; ++k)
                cells.push_back({r.alpha, r.beta, 0.2, false, 0.0, tvs[k],
                                 r.v[2 * k], r.v[2 * k + 1]});
        for (const auto& r : affine_rows)
            for (int k = 0; k < 3; ++k)
                cells.push_back({r.alpha, r.beta, 0.2, true, 0.02, tvs[k],
                                 r.v[2 * k], r.v[2 * k + 1]});
    } else {
        throw std::invalid_argument("table_cells: table id must be 1 or 2");
    }
    return cells;
}

inline double table_tolerance(int table_id) { return table_id == 1 ? 0.005 : 0.02; }

/// Common parameters of both tables.
inline MarketParams table_market() { return MarketParams{10.0, 10.0, 0.05, 0.015, 0.2, 10.0}; }

inline ExercisePolicy cell_policy(const TableCell& cell) {
    if (cell.affine)
        return ExercisePolicy::affine(cell.lambda, cell.affine_b,
                                      JumpSizeDistribution::uniform());
    return ExercisePolicy::constant(cell.lambda, JumpSizeDistribution::uniform());
}

inline GrantSpec cell_grant(const TableCell& cell) {
    return GrantSpec{5, cell.t_v, cell.alpha, cell.beta};
}

enum class Method { Fft, Fdm, Mc, Mr };

struct TableRow {
    TableCell cell;
    double fft = std::numeric_limits<double>::quiet_NaN();
    double fdm = std::numeric_limits<double>::quiet_NaN();
    double mc = std::numeric_limits<double>::quiet_NaN();
    double mc_stderr = std::numeric_limits<double>::quiet_NaN();
    bool pass_fft = true;
    bool pass_fdm = true;
    bool pass_cross = true;
    bool pass_mc = true;
};

struct TableReport {
    int table_id = 0;
    double tolerance = 0.0;
    std::vector<TableRow> rows;
    bool all_pass = true;
};

struct TableOptions {
    std::size_t mc_paths = 100000;
    std::uint64_t seed = 917;
    unsigned threads = 0;
};

/**
 * Recompute a benchmark table with the requested methods and compare against
 * the reference values (FFT/FDM columns at the table tolerance) and against each
 * other (|FFT - FDM| <= 0.01 at S0; MC within 3 standard errors of FFT).
 * PDE cells run in parallel; the Monte Carlo column runs as a second pass
 * (it fans out internally) and report assembly stays order-stable.
 */
inline TableReport reproduce_table(int table_id, const std::vector<Method>& methods,
                                   const TableOptions& opts = {}) {
    const MarketParams mkt = table_market();
    const bool want_fft = std::count(methods.begin(), methods.end(), Method::Fft) > 0;
    const bool want_fdm = std::count(methods.begin(), methods.end(), Method::Fdm) > 0;
    const bool want_mc = std::count(methods.begin(), methods.end(), Method::Mc) > 0;

    TableReport report;
    report.table_id = table_id;
    report.tolerance = table_tolerance(table_id);
    const std::vector<TableCell> cells = table_cells(table_id);
    report.rows.resize(cells.size());

    detail::for_each_block(
        cells.size(), 1, opts.threads, [&](std::size_t idx, std::size_t, std::size_t) {
            TableRow& row = report.rows[idx];
            row.cell = cells[idx];
            const GrantSpec grant = cell_grant(row.cell);
            const ExercisePolicy pol = cell_policy(row.cell);
            if (want_fft) {
                row.fft = FftEngine(mkt, grant, pol).price();
                row.pass_fft = std::fabs(row.fft - row.cell.ref_fft) <= report.tolerance;
            }
            if (want_fdm) {
                row.fdm = FdmEngine(mkt, grant, pol).price();
                row.pass_fdm = std::fabs(row.fdm - row.cell.ref_fdm) <= report.tolerance;
            }
            if (want_fft && want_fdm)
                row.pass_cross = std::fabs(row.fft - row.fdm) <= 0.01;
        });
    if (want_mc) {
        for (TableRow& row : report.rows) {
            const McResult mc = mc_price(mkt, cell_grant(row.cell), cell_policy(row.cell),
                                         opts.mc_paths, opts.seed, opts.threads);
            row.mc = mc.estimate;
            row.mc_stderr = mc.std_error;
            const double ref = want_fft ? row.fft : row.cell.ref_fft;
            row.pass_mc = std::fabs(mc.estimate - ref) <= 3.0 * mc.std_error;
        }
    }
    for (const TableRow& row : report.rows)
        report.all_pass = report.all_pass && row.pass_fft && row.pass_fdm &&
                          row.pass_cross && row.pass_mc;
    return report;
}

// ---------------------------------------------------------------------------
// Figure sweeps
// ---------------------------------------------------------------------------

/// Column-labelled numeric table, ready for CSV emission.
struct Series {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

/**
 * Sweep configuration. `market`, `grant` and `jumps` default to the
 * reference parameter sets behind the figure sweeps; supply values from a
 * model parameter file to sweep around a custom base point instead.
 */
struct SweepOptions {
    Method method = Method::Fft;
    std::size_t mc_paths = 1000000;   ///< tau-bar columns (desk-scale default)
    std::uint64_t seed = 917;
    unsigned threads = 0;
    std::optional<MarketParams> market;
    std::optional<GrantSpec> grant;
    std::optional<JumpSizeDistribution> jumps;
};

namespace detail {

inline double price_by_method(Method method, const MarketParams& mkt, const GrantSpec& g,
                              const ExercisePolicy& pol, const SweepOptions& opts) {
    switch (method) {
        case Method::Fft: return FftEngine(mkt, g, pol).price();
        case Method::Fdm: return FdmEngine(mkt, g, pol).price();
        case Method::Mr: return mr_price(mkt, g, pol);
        case Method::Mc:
            return mc_price(mkt, g, pol, opts.mc_paths, opts.seed, opts.threads).estimate;
    }
    throw std::logic_error("price_by_method: unknown method");
}

inline std::string trim_number(double v) {
    std::string s = std::to_string(v);
    s.erase(s.find_last_not_of('0') + 1);
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
}

}  // namespace detail

/**
 * Grant cost and implied maturity against the exercise intensity, at the
 * maturities {0.5, 0.8, 1.0} x T (the reference sweep: T in {5, 8, 10}).
 * Default base: t_v = 0, beta = 0.1, M = 5, uniform jumps.
 */
inline Series sweep_lambda(const std::vector<double>& lambdas,
                           const SweepOptions& opts = {}) {
    const MarketParams base = opts.market.value_or(table_market());
    const GrantSpec grant = opts.grant.value_or(GrantSpec{5, 0.0, 0.0, 0.1});
    const JumpSizeDistribution jumps =
        opts.jumps.value_or(JumpSizeDistribution::uniform());
    const double maturities[] = {0.5 * base.T, 0.8 * base.T, base.T};
    Series s;
    s.columns = {"lambda"};
    for (const char* prefix : {"cost_T", "per_unit_T", "implied_maturity_T"})
        for (double T : maturities)
            s.columns.push_back(prefix + detail::trim_number(T));
    for (double lam : lambdas) {
        std::vector<double> row{lam};
        std::vector<double> per_unit;
        for (double T : maturities) {
            MarketParams mkt = base;
            mkt.T = T;
            const ExercisePolicy pol = ExercisePolicy::constant(lam, jumps);
            const double cost = detail::price_by_method(opts.method, mkt, grant, pol, opts);
            row.push_back(cost);
            per_unit.push_back(cost / grant.M);
        }
        for (double pu : per_unit) row.push_back(pu);
        for (double pu : per_unit) row.push_back(implied_maturity(pu, base).t_tilde);
        s.rows.push_back(std::move(row));
    }
    return s;
}

/**
 * Per-unit cost, simulated mean tau-bar, and implied maturity against the
 * grant size for lambda in {0.5, 1}. Default base: t_v = 1, beta = 0.5,
 * alpha = 0.1, uniform jumps.
 */
inline Series sweep_grant_size(int m_max, const SweepOptions& opts = {}) {
    const MarketParams mkt = opts.market.value_or(table_market());
    const GrantSpec base = opts.grant.value_or(GrantSpec{1, 1.0, 0.1, 0.5});
    const JumpSizeDistribution jumps =
        opts.jumps.value_or(JumpSizeDistribution::uniform());
    const double lambdas[] = {0.5, 1.0};
    Series s;
    s.columns = {"M",
                 "cost_l05", "per_unit_l05", "avg_exercise_time_l05", "implied_maturity_l05",
                 "cost_l1", "per_unit_l1", "avg_exercise_time_l1", "implied_maturity_l1"};
    for (int M = 1; M <= m_max; ++M) {
        std::vector<double> row{static_cast<double>(M)};
        for (double lam : lambdas) {
            GrantSpec grant = base;
            grant.M = M;
            const ExercisePolicy pol = ExercisePolicy::constant(lam, jumps);
            const double cost = detail::price_by_method(opts.method, mkt, grant, pol, opts);
            const TauBarStats tau = mc_avg_exercise_time(mkt, grant, pol, opts.mc_paths,
                                                         opts.seed, opts.threads);
            row.push_back(cost);
            row.push_back(cost / M);
            row.push_back(tau.mean);
            row.push_back(implied_maturity(cost / M, mkt).t_tilde);
        }
        s.rows.push_back(std::move(row));
    }
    return s;
}

/**
 * Grant cost against the initial stock price for lambda in {0, 1, 5}, with
 * the per-unit payoff for reference. Default base: t_v = 0, beta = 0.1,
 * M = 5, uniform jumps.
 */
inline Series sweep_stock(const std::vector<double>& spots, const SweepOptions& opts = {}) {
    const MarketParams mkt = opts.market.value_or(table_market());
    const GrantSpec grant = opts.grant.value_or(GrantSpec{5, 0.0, 0.0, 0.1});
    const JumpSizeDistribution jumps =
        opts.jumps.value_or(JumpSizeDistribution::uniform());
    const double lambdas[] = {0.0, 1.0, 5.0};
    Series s;
    s.columns = {"S0", "payoff",
                 "cost_l0", "cost_l1", "cost_l5",
                 "per_unit_l0", "per_unit_l1", "per_unit_l5"};
    // One surface per lambda serves every S0.
    std::vector<CostSurface> surfaces;
    for (double lam : lambdas) {
        const ExercisePolicy pol = ExercisePolicy::constant(lam, jumps);
        const FftEngine engine(mkt, grant, pol);
        CostSurface surf = engine.solve_vested({grant.t_v});
        if (grant.t_v > 0.0) surf = engine.solve_unvested(surf, {0.0});
        surfaces.push_back(std::move(surf));
    }
    for (double s0 : spots) {
        std::vector<double> row{s0, pos_part(s0 - mkt.K)};
        std::vector<double> costs;
        for (const auto& surf : surfaces) costs.push_back(surf.value_at(grant.M, 0, s0));
        for (double c : costs) row.push_back(c);
        for (double c : costs) row.push_back(c / grant.M);
        s.rows.push_back(std::move(row));
    }
    return s;
}

}  // namespace eso
