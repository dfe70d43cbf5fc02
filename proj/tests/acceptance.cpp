// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Reproduces the comparison tables, the cross-method agreement
// bounds, the degenerate-case oracles, the randomized-maturity error decay
// and residual certificates, the figure-shape properties, the numerical
// convergence checks, and simulation determinism.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "eso/analysis.hpp"
#include "eso/black_scholes.hpp"
#include "eso/fdm_engine.hpp"
#include "eso/fft_engine.hpp"
#include "eso/matrand.hpp"
#include "eso/model.hpp"
#include "eso/simulation.hpp"

using namespace eso;

namespace {

int g_failures = 0;

void report(int id, const std::string& what, bool ok, const std::string& detail) {
    std::printf("%s criterion %d: %s [%s]\n", ok ? "PASS" : "FAIL", id, what.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

double elapsed_s(std::chrono::steady_clock::time_point from) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - from).count();
}

const MarketParams kMkt = table_market();
const auto kUniform = JumpSizeDistribution::uniform();

// ---------------------------------------------------------------- criterion 1/2
TableReport check_table(int id, double* wall_time) {
    const auto start = std::chrono::steady_clock::now();
    const TableReport rep = reproduce_table(id, {Method::Fft, Method::Fdm});
    *wall_time = elapsed_s(start);
    double worst = 0.0;
    bool within = true;
    for (const auto& row : rep.rows) {
        worst = std::max(worst, std::fabs(row.fft - row.cell.ref_fft));
        worst = std::max(worst, std::fabs(row.fdm - row.cell.ref_fdm));
        within = within && row.pass_fft && row.pass_fdm;
    }
    std::ostringstream detail;
    detail << "24 cells, max |delta| = " << worst << ", tol " << rep.tolerance << ", "
           << *wall_time << " s";
    report(id, "table " + std::to_string(id) + " reproduction",
           within && *wall_time < 120.0, detail.str());
    return rep;
}

// ------------------------------------------------------------------ criterion 3
void check_cross_method(const TableReport& t1, const TableReport& t2) {
    double worst_gap = 0.0;
    bool ok = true;
    for (const auto* rep : {&t1, &t2})
        for (const auto& row : rep->rows) {
            const double gap = std::fabs(row.fft - row.fdm);
            worst_gap = std::max(worst_gap, gap);
            ok = ok && gap <= 0.01;
        }

    // six designated cells for the Monte Carlo cross-check
    struct McCell { int table; std::size_t index; };
    const McCell cells[] = {{1, 0}, {1, 9}, {1, 16}, {1, 20}, {2, 10}, {2, 19}};
    double worst_z = 0.0;
    for (const auto& [table, index] : cells) {
        const TableCell cell = table_cells(table)[index];
        const double fft = (table == 1 ? t1 : t2).rows[index].fft;
        const McResult mc =
            mc_price(kMkt, cell_grant(cell), cell_policy(cell), 100000, 917);
        worst_z = std::max(worst_z, std::fabs(mc.estimate - fft) / mc.std_error);
        ok = ok && std::fabs(mc.estimate - fft) <= 3.0 * mc.std_error;
    }
    std::ostringstream detail;
    detail << "max |FFT-FDM| = " << worst_gap << " (<= 0.01), max MC |z| = " << worst_z
           << " over 6 cells at 1e5 paths";
    report(3, "cross-method agreement", ok, detail.str());
}

// ------------------------------------------------------------------ criterion 4
void check_bs_degeneracy() {
    const GrantSpec grant{1, 0.0, 0.0, 0.0};
    const auto pol = ExercisePolicy::constant(0.0, JumpSizeDistribution::unit());
    const double oracle = bs_call(10, 10, 0.05, 0.015, 0.2, 10.0);
    const double fft = FftEngine(kMkt, grant, pol).price();
    const double fdm = FdmEngine(kMkt, grant, pol).price();
    const double fft_err = std::fabs(fft - oracle);
    const double fdm_err = std::fabs(fdm - oracle);
    std::ostringstream detail;
    detail << "|FFT-BS| = " << fft_err << " (<= 1e-3), |FDM-BS| = " << fdm_err
           << " (<= 1e-2)";
    report(4, "Black-Scholes degeneracy", fft_err <= 1e-3 && fdm_err <= 1e-2,
           detail.str());
}

// ------------------------------------------------------------------ criterion 5
void check_mr_error_decay() {
    const GrantSpec grant{5, 0.0, 0.0, 1.0};
    const auto pol = ExercisePolicy::constant(1.0, kUniform);
    std::vector<double> lams;
    for (int l = 2; l <= 10; ++l) lams.push_back(l);
    const auto rows = mr_error_curve(kMkt, grant, pol, lams, MrSweep::Lambda);
    bool monotone = true;
    for (std::size_t i = 1; i < rows.size(); ++i)
        monotone = monotone && rows[i].abs_error < rows[i - 1].abs_error;
    bool penny = true;
    for (const auto& row : rows)
        if (row.sweep_value >= 6.0) penny = penny && row.per_unit_error < 0.01;

    // closed-form evaluation speed: well under a millisecond per price
    const auto start = std::chrono::steady_clock::now();
    double sink = 0.0;
    for (int rep = 0; rep < 1000; ++rep) sink += mr_price(kMkt, grant, pol);
    const double per_eval = elapsed_s(start) / 1000.0;
    std::ostringstream detail;
    detail << "per-unit error at lambda=6: " << rows[4].per_unit_error
           << " (< 0.01), monotone decay: " << (monotone ? "yes" : "no") << ", "
           << per_eval * 1e6 << " us/eval (sink " << (sink > 0) << ")";
    report(5, "maturity-randomization error decay", monotone && penny && per_eval < 1e-3,
           detail.str());
}

// ------------------------------------------------------------------ criterion 6
void check_mr_residuals() {
    const auto pol = ExercisePolicy::constant(1.0, kUniform);
    const GrantSpec grant{10, 2.0, 0.1, 1.0};
    const MrCoefficients co = mr_coefficients(kMkt, grant, pol, 0.125);
    const MrTildeCoefficients tc = mr_tilde_coefficients(co, kMkt, grant, 0.5);
    double worst = 0.0;
    for (int m = 1; m <= 10; ++m) {
        for (int side = 0; side < 2; ++side) {
            for (int i = 0; i < 100; ++i) {
                const double s = side == 0 ? 0.2 + (kMkt.K - 0.2 - 1e-6) * (i + 0.5) / 100.0
                                           : kMkt.K + 1e-6 + (60.0 - kMkt.K) * (i + 0.5) / 100.0;
                {
                    const MrValue v = mr_vested_value(co, s, m);
                    const double g =
                        co.lambda * pol.jump_sizes().expected_jump(m) + m * (co.beta + co.kappa);
                    double coupling = 0.0;
                    for (int z = 1; z < m; ++z)
                        coupling += pol.jump_sizes().prob(m, z) * mr_vested_cost(co, s, m - z);
                    const double terms[] = {co.a0 * v.value, co.a1 * s * v.d1,
                                            co.a2 * s * s * v.d2, co.lambda * coupling,
                                            g * call_payoff(s, co.strike)};
                    double res = 0.0, scale = 1.0;
                    for (double t : terms) {
                        res += t;
                        scale = std::max(scale, std::fabs(t));
                    }
                    worst = std::max(worst, std::fabs(res) / scale);
                }
                {
                    const MrValue v = mr_unvested_value(co, tc, s, m);
                    const double terms[] = {-(kMkt.r + tc.alpha + tc.kappa_tilde) * v.value,
                                            co.a1 * s * v.d1, co.a2 * s * s * v.d2,
                                            tc.kappa_tilde * mr_vested_cost(co, s, m)};
                    double res = 0.0, scale = 1.0;
                    for (double t : terms) {
                        res += t;
                        scale = std::max(scale, std::fabs(t));
                    }
                    worst = std::max(worst, std::fabs(res) / scale);
                }
            }
        }
    }
    std::ostringstream detail;
    detail << "max scaled residual = " << worst << " over m <= 10, 100 points per branch";
    report(6, "closed-form residual certificate", worst <= 1e-8, detail.str());
}

// ------------------------------------------------------------------ criterion 7
void check_figure_shapes() {
    bool ok = true;
    std::ostringstream detail;

    {  // cost decreasing & convex in lambda; curves converge across T
        std::vector<double> lams;
        for (double l = 0.0; l <= 5.0 + 1e-12; l += 0.5) lams.push_back(l);
        const Series s = sweep_lambda(lams);
        const std::size_t c5 = 1, c10 = 3, im5 = 7, im10 = 9;
        for (std::size_t i = 1; i < s.rows.size(); ++i) {
            ok = ok && s.rows[i][c10] < s.rows[i - 1][c10];
            ok = ok && s.rows[i][im10] < s.rows[i - 1][im10];         // figure 9 decay
            const double spread = s.rows[i][c10] - s.rows[i][c5];
            const double prev_spread = s.rows[i - 1][c10] - s.rows[i - 1][c5];
            ok = ok && spread < prev_spread + 1e-12;                  // cost curves converge
            const double im_spread = s.rows[i][im10] - s.rows[i][im5];
            const double prev_im_spread = s.rows[i - 1][im10] - s.rows[i - 1][im5];
            ok = ok && im_spread < prev_im_spread + 1e-9;             // figure 9 convergence
        }
        for (std::size_t i = 1; i + 1 < s.rows.size(); ++i)
            ok = ok && s.rows[i + 1][c10] - 2.0 * s.rows[i][c10] + s.rows[i - 1][c10] >= -1e-9;
        detail << "lambda sweep " << (ok ? "ok" : "violated");
    }

    {  // per-unit cost and simulated mean tau-bar nondecreasing in M
        bool shape = true;
        for (double lam : {0.5, 1.0}) {
            double prev_pu = -1.0, prev_tau = -1.0, prev_se = 0.0;
            for (int M = 1; M <= 20; ++M) {
                const GrantSpec grant{M, 1.0, 0.1, 0.5};
                const auto pol = ExercisePolicy::constant(lam, kUniform);
                const double per_unit = FftEngine(kMkt, grant, pol).price() / M;
                const TauBarStats tau =
                    mc_avg_exercise_time(kMkt, grant, pol, 200000, 917);
                shape = shape && per_unit >= prev_pu - 1e-9;
                shape = shape && tau.mean >= prev_tau - 3.0 * (tau.std_error + prev_se);
                prev_pu = per_unit;
                prev_tau = tau.mean;
                prev_se = tau.std_error;
            }
        }
        ok = ok && shape;
        detail << "; grant-size sweep " << (shape ? "ok" : "violated");
    }

    {  // tau-bar histograms shift left as beta or lambda increases (3 sigma)
        const GrantSpec g_b{20, 0.0, 0.0, 0.1};
        const GrantSpec g_c{20, 0.0, 0.0, 0.3};
        const auto pol_03 = ExercisePolicy::constant(0.3, kUniform);
        const auto pol_05 = ExercisePolicy::constant(0.5, kUniform);
        const TauBarStats b = mc_avg_exercise_time(kMkt, g_b, pol_03, 10000, 11);
        const TauBarStats c = mc_avg_exercise_time(kMkt, g_c, pol_03, 10000, 12);
        const TauBarStats d = mc_avg_exercise_time(kMkt, g_b, pol_05, 10000, 13);
        const bool beta_shift = b.mean - c.mean > 3.0 * (b.std_error + c.std_error);
        const bool lambda_shift = d.mean < b.mean - 3.0 * (b.std_error + d.std_error);
        ok = ok && beta_shift && lambda_shift;
        detail << "; histogram shifts: beta " << (beta_shift ? "ok" : "violated")
               << ", lambda " << (lambda_shift ? "ok" : "violated");
    }
    report(7, "figure-shape properties", ok, detail.str());
}

// ------------------------------------------------------------------ criterion 8
void check_numerics() {
    bool ok = true;
    std::ostringstream detail;

    {  // FDM Richardson ratio
        const GrantSpec grant{5, 0.0, 0.0, 0.1};
        const auto pol = ExercisePolicy::constant(1.0, kUniform);
        auto price_at = [&](double h) {
            return FdmEngine(kMkt, grant, pol, FdGrid{30.0, h, h}).price();
        };
        const double c1 = price_at(0.1), c2 = price_at(0.05), c3 = price_at(0.025);
        const double ratio = std::fabs(c1 - c2) / std::fabs(c2 - c3);
        ok = ok && ratio >= 2.5 && ratio <= 6.0;
        detail << "Richardson ratio = " << ratio;
    }
    {  // FFT dt halving
        const GrantSpec grant{5, 0.0, 0.1, 0.0};
        const auto pol =
            ExercisePolicy::time_dependent([](double) { return 1.0; }, kUniform, 0.0, 10.0);
        SpectralGrid fine;
        fine.dt = 0.005;
        const double coarse =
            FftEngine(kMkt, grant, pol).solve_vested_timedep().value_at(5, 0, 10.0);
        const double refined =
            FftEngine(kMkt, grant, pol, fine).solve_vested_timedep().value_at(5, 0, 10.0);
        ok = ok && std::fabs(coarse - refined) <= 1e-4;
        detail << ", dt-halving shift = " << std::fabs(coarse - refined);
    }
    {  // spectral round trip and conjugate symmetry
        const FftEngine engine(kMkt, GrantSpec{5, 0.0, 0.1, 0.0},
                               ExercisePolicy::constant(1.0, kUniform));
        const auto spec = engine.payoff_transform();
        const auto back = engine.inverse_transform(spec);
        double worst = 0.0;
        const auto& grid = engine.grid();
        for (std::size_t i = 0; i < grid.n_x; ++i) {
            const double expect = call_payoff(kMkt.K * std::exp(grid.x(i)), kMkt.K);
            worst = std::max(worst,
                             std::fabs(back[i] - expect) / std::max(1.0, expect));
        }
        const double sym = FftEngine::conjugate_symmetry_error(spec);
        ok = ok && worst <= 1e-10 && sym <= 1e-10;
        detail << ", round trip = " << worst << ", symmetry = " << sym;
    }
    report(8, "numerical-analysis properties", ok, detail.str());
}

// ------------------------------------------------------------------ criterion 9
void check_determinism() {
    const GrantSpec grant{5, 2.0, 0.1, 0.5};
    const auto pol = ExercisePolicy::affine(0.2, 0.02, kUniform);
    const McResult a = mc_price(kMkt, grant, pol, 50000, 31, 1);
    const McResult b = mc_price(kMkt, grant, pol, 50000, 31, 2);
    const McResult c = mc_price(kMkt, grant, pol, 50000, 31, 0);
    const McResult d = mc_price(kMkt, grant, pol, 50000, 31, 1);
    const bool ok = a.estimate == b.estimate && a.estimate == c.estimate &&
                    a.estimate == d.estimate && a.std_error == b.std_error &&
                    a.std_error == c.std_error;
    std::ostringstream detail;
    detail << "estimate " << a.estimate << " bit-identical across runs and 1/2/hw workers";
    report(9, "simulation determinism", ok, detail.str());
}

}  // namespace

int main() {
    std::printf("ESO valuation engine acceptance suite\n");
    double t1_time = 0.0, t2_time = 0.0;
    const TableReport t1 = check_table(1, &t1_time);
    const TableReport t2 = check_table(2, &t2_time);
    check_cross_method(t1, t2);
    check_bs_degeneracy();
    check_mr_error_decay();
    check_mr_residuals();
    check_figure_shapes();
    check_numerics();
    check_determinism();
    if (g_failures > 0) {
        std::printf("%d criterion(s) FAILED\n", g_failures);
        return 1;
    }
    std::printf("all criteria passed\n");
    return 0;
}
