#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "eso/analysis.hpp"
#include "eso/black_scholes.hpp"
#include "eso/fdm_engine.hpp"
#include "eso/fft_engine.hpp"
#include "eso/matrand.hpp"
#include "eso/model.hpp"
#include "eso/params_io.hpp"
#include "eso/simulation.hpp"

namespace {

struct OutStream {
    explicit OutStream(const std::string& path) {
        if (!path.empty()) {
            file.open(path);
            if (!file) throw std::runtime_error("cannot open output file: " + path);
        }
    }
    std::ostream& get() { return file.is_open() ? file : std::cout; }
    std::ofstream file;
};

eso::Method parse_method(const std::string& name) {
    if (name == "fft") return eso::Method::Fft;
    if (name == "fdm") return eso::Method::Fdm;
    if (name == "mr") return eso::Method::Mr;
    if (name == "mc") return eso::Method::Mc;
    throw CLI::ValidationError("--method", "unknown method '" + name + "'");
}

void emit_surface_csv(std::ostream& os, const eso::CostSurface& surf, double x_window) {
    os << "m,t,s,value\n";
    os << std::setprecision(12);
    for (int m = 1; m <= surf.m_max; ++m) {
        for (std::size_t ti = 0; ti < surf.n_time(); ++ti) {
            for (std::size_t j = 0; j < surf.n_space(); ++j) {
                if (surf.kind == eso::CostSurface::SpaceKind::LogMoneyness &&
                    std::fabs(surf.coords[j]) > x_window)
                    continue;
                os << m << ',' << surf.times[ti] << ',' << surf.spot(j) << ','
                   << surf.at(m, ti, j) << '\n';
            }
        }
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Valuation engine for multi-unit ESO grants under top-down exercise"};
    app.require_subcommand(1);

    std::string params_path, out_path, method_str = "fft", surface_csv;
    std::string boundary_str = "auto";
    std::size_t nx = 1u << 12;
    double x_min = -10.0, x_max = 10.0, dt_fft = 0.01;
    double s_star = 30.0, ds = 0.1, dt_fdm = 0.1;
    double kappa = 0.0, kappa_tilde = 0.0;
    std::string mr_unvested = "mr";
    std::size_t n_paths = 100000;
    std::uint64_t seed = 917;
    unsigned threads = 0;
    bool as_json = false;

    auto add_common = [&](CLI::App* cmd, bool with_method = true) {
        cmd->add_option("params", params_path, "model parameter file (JSON)")
            ->required()
            ->check(CLI::ExistingFile);
        if (with_method)
            cmd->add_option("--method", method_str, "fft|fdm|mr|mc")
                ->default_val("fft")
                ->check(CLI::IsMember({"fft", "fdm", "mr", "mc"}));
        cmd->add_option("--out", out_path, "write output to a file instead of stdout");
    };
    auto add_grid_flags = [&](CLI::App* cmd) {
        cmd->add_option("--nx", nx, "FFT grid size (power of two)");
        cmd->add_option("--x-min", x_min, "FFT log-moneyness lower bound");
        cmd->add_option("--x-max", x_max, "FFT log-moneyness upper bound");
        cmd->add_option("--dt-fft", dt_fft, "FFT time step");
        cmd->add_option("--s-star", s_star, "FDM far boundary");
        cmd->add_option("--ds", ds, "FDM price step");
        cmd->add_option("--dt-fdm", dt_fdm, "FDM time step");
        cmd->add_option("--boundary", boundary_str,
                        "FDM far-field closure: auto|dirichlet|zero-gamma")
            ->check(CLI::IsMember({"auto", "dirichlet", "zero-gamma"}));
    };
    auto add_mc_flags = [&](CLI::App* cmd) {
        cmd->add_option("--paths", n_paths, "Monte Carlo path count");
        cmd->add_option("--seed", seed, "Monte Carlo seed");
        cmd->add_option("--threads", threads, "worker threads (0 = hardware)");
    };

    auto* price_cmd = app.add_subcommand("price", "price one grant");
    add_common(price_cmd);
    add_grid_flags(price_cmd);
    add_mc_flags(price_cmd);
    price_cmd->add_option("--kappa", kappa, "MR inverse expected maturity (default 1/(T-t_v))");
    price_cmd->add_option("--kappa-tilde", kappa_tilde,
                          "MR inverse expected vesting time (default 1/t_v)");
    price_cmd->add_option("--mr-unvested", mr_unvested,
                          "unvested stage for --method mr: mr|fft")
        ->check(CLI::IsMember({"mr", "fft"}));
    price_cmd->add_option("--surface-csv", surface_csv,
                          "also write the cost surface as CSV (m,t,s,value)");
    bool boundary_gap = false;
    price_cmd->add_flag("--boundary-gap", boundary_gap,
                        "with --method fdm, also report |Dirichlet - zero-gamma| at S0");
    price_cmd->add_flag("--json", as_json, "JSON output");

    int table_id = 1;
    std::string methods_csv = "fft,fdm";
    bool check = false;
    auto* table_cmd = app.add_subcommand("table", "reproduce a benchmark comparison table");
    table_cmd->add_option("--id", table_id, "table id (1 or 2)")
        ->required()
        ->check(CLI::IsMember({1, 2}));
    table_cmd->add_option("--methods", methods_csv, "comma list of fft,fdm,mc");
    table_cmd->add_flag("--check", check, "exit nonzero unless every cell passes");
    table_cmd->add_option("--out", out_path, "write output to a file instead of stdout");
    add_mc_flags(table_cmd);

    std::string sweep_kind;
    int m_max = 20;
    double lambda_min = 0.0, lambda_max = 5.0, lambda_step = 0.25;
    double s_min = 6.0, s_max = 16.0, s_step = 0.25;
    std::size_t sweep_paths = 1000000;
    auto* sweep_cmd = app.add_subcommand("sweep", "figure-style parameter sweeps");
    sweep_cmd->add_option("params", params_path,
                          "optional base parameter file (defaults to the reference sets)")
        ->check(CLI::ExistingFile);
    sweep_cmd->add_option("--kind", sweep_kind, "lambda|grant|stock")
        ->required()
        ->check(CLI::IsMember({"lambda", "grant", "stock"}));
    sweep_cmd->add_option("--method", method_str, "fft|fdm|mr|mc")
        ->default_val("fft")
        ->check(CLI::IsMember({"fft", "fdm", "mr", "mc"}));
    sweep_cmd->add_option("--out", out_path, "write output to a file instead of stdout");
    sweep_cmd->add_option("--m-max", m_max, "grant sweep: largest M");
    sweep_cmd->add_option("--lambda-min", lambda_min, "lambda sweep lower bound");
    sweep_cmd->add_option("--lambda-max", lambda_max, "lambda sweep upper bound");
    sweep_cmd->add_option("--lambda-step", lambda_step, "lambda sweep step");
    sweep_cmd->add_option("--s-min", s_min, "stock sweep lower bound");
    sweep_cmd->add_option("--s-max", s_max, "stock sweep upper bound");
    sweep_cmd->add_option("--s-step", s_step, "stock sweep step");
    sweep_cmd->add_option("--paths", sweep_paths, "paths for average-exercise-time columns");
    sweep_cmd->add_option("--seed", seed, "Monte Carlo seed");
    sweep_cmd->add_option("--threads", threads, "worker threads (0 = hardware)");

    std::string mr_sweep_kind = "lambda";
    double mr_min = 1.0, mr_max = 10.0, mr_step = 1.0;
    auto* mre_cmd = app.add_subcommand(
        "mr-error", "|maturity randomization - FFT| error curve over lambda or beta");
    mre_cmd->add_option("params", params_path, "model parameter file (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    mre_cmd->add_option("--sweep", mr_sweep_kind, "lambda|beta")
        ->check(CLI::IsMember({"lambda", "beta"}));
    mre_cmd->add_option("--min", mr_min, "sweep lower bound");
    mre_cmd->add_option("--max", mr_max, "sweep upper bound");
    mre_cmd->add_option("--step", mr_step, "sweep step");
    mre_cmd->add_option("--out", out_path, "write output to a file instead of stdout");

    auto* im_cmd = app.add_subcommand("implied-maturity",
                                      "Black-Scholes maturity matching the per-unit cost");
    add_common(im_cmd);
    add_grid_flags(im_cmd);
    add_mc_flags(im_cmd);
    im_cmd->add_flag("--json", as_json, "JSON output");

    std::size_t sim_paths = 10000, bins = 50, emit_paths = 0;
    auto* sim_cmd = app.add_subcommand(
        "simulate", "simulate exercise paths; emit tau-bar histogram or path samples");
    add_common(sim_cmd, false);
    sim_cmd->add_option("--paths", sim_paths, "number of simulated paths");
    sim_cmd->add_option("--seed", seed, "simulation seed");
    sim_cmd->add_option("--threads", threads, "worker threads (0 = hardware)");
    sim_cmd->add_option("--bins", bins, "histogram bin count");
    sim_cmd->add_option("--emit-paths", emit_paths,
                        "emit this many sample paths as CSV instead of the histogram");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*price_cmd || *im_cmd) {
            const eso::ModelInputs in = eso::load_params(params_path);
            const eso::Method method = parse_method(method_str);
            eso::SpectralGrid sgrid{nx, x_min, x_max, dt_fft};
            eso::FdGrid fgrid{s_star, ds, dt_fdm};

            double price = 0.0, std_error = 0.0;
            std::vector<double> per_m;
            if (method == eso::Method::Fft) {
                eso::FftEngine engine(in.market, in.grant, in.policy, sgrid);
                eso::CostSurface surf = engine.solve_vested({in.grant.t_v});
                if (in.grant.t_v > 0.0) surf = engine.solve_unvested(surf, {0.0});
                for (int m = 1; m <= in.grant.M; ++m)
                    per_m.push_back(surf.value_at(m, 0, in.market.S0));
                price = per_m.back();
                if (!surface_csv.empty()) {
                    std::ofstream sf(surface_csv);
                    emit_surface_csv(sf, surf, eso::FftEngine::kReportX);
                }
            } else if (method == eso::Method::Fdm) {
                std::optional<eso::FdBoundary> bnd;
                if (boundary_str == "dirichlet") bnd = eso::FdBoundary::AnsatzDirichlet;
                if (boundary_str == "zero-gamma") bnd = eso::FdBoundary::ZeroGamma;
                auto engine = bnd ? eso::FdmEngine(in.market, in.grant, in.policy, fgrid, *bnd)
                                  : eso::FdmEngine(in.market, in.grant, in.policy, fgrid);
                eso::CostSurface surf = engine.solve_vested_cn({in.grant.t_v});
                if (in.grant.t_v > 0.0) surf = engine.solve_unvested_cn(surf, {0.0});
                for (int m = 1; m <= in.grant.M; ++m)
                    per_m.push_back(surf.value_at(m, 0, in.market.S0));
                price = per_m.back();
                if (boundary_gap) {
                    const double p_d =
                        eso::FdmEngine(in.market, in.grant, in.policy, fgrid,
                                       eso::FdBoundary::AnsatzDirichlet).price();
                    const double p_z =
                        eso::FdmEngine(in.market, in.grant, in.policy, fgrid,
                                       eso::FdBoundary::ZeroGamma).price();
                    std::cerr << "boundary gap |Dirichlet - zero-gamma| at S0: "
                              << std::fabs(p_d - p_z) << '\n';
                }
                if (!surface_csv.empty()) {
                    std::ofstream sf(surface_csv);
                    emit_surface_csv(sf, surf, 1e9);
                }
            } else if (method == eso::Method::Mr) {
                const double kap = kappa > 0.0 ? kappa : 1.0 / (in.market.T - in.grant.t_v);
                const eso::MrCoefficients co =
                    eso::mr_coefficients(in.market, in.grant, in.policy, kap);
                if (in.grant.t_v == 0.0) {
                    for (int m = 1; m <= in.grant.M; ++m)
                        per_m.push_back(eso::mr_vested_cost(co, in.market.S0, m));
                } else if (mr_unvested == "fft") {
                    // Randomized-maturity vested slice propagated through the
                    // finite-horizon unvested transform.
                    eso::CostSurface vested;
                    vested.m_max = in.grant.M;
                    vested.strike = in.market.K;
                    vested.kind = eso::CostSurface::SpaceKind::LogMoneyness;
                    vested.times = {in.grant.t_v};
                    vested.coords.resize(sgrid.n_x);
                    vested.values.resize(static_cast<std::size_t>(in.grant.M) * sgrid.n_x);
                    for (std::size_t i = 0; i < sgrid.n_x; ++i) {
                        vested.coords[i] = sgrid.x(i);
                        const double s = in.market.K * std::exp(sgrid.x(i));
                        for (int m = 1; m <= in.grant.M; ++m)
                            vested.at(m, 0, i) = eso::mr_vested_cost(co, s, m);
                    }
                    eso::FftEngine engine(in.market, in.grant, in.policy, sgrid);
                    const eso::CostSurface unv = engine.solve_unvested(vested, {0.0});
                    for (int m = 1; m <= in.grant.M; ++m)
                        per_m.push_back(unv.value_at(m, 0, in.market.S0));
                } else {
                    const double kt =
                        kappa_tilde > 0.0 ? kappa_tilde : 1.0 / in.grant.t_v;
                    const eso::MrTildeCoefficients tc =
                        eso::mr_tilde_coefficients(co, in.market, in.grant, kt);
                    for (int m = 1; m <= in.grant.M; ++m)
                        per_m.push_back(
                            eso::mr_unvested_value(co, tc, in.market.S0, m).value);
                }
                price = per_m.back();
            } else {
                const eso::McResult mc = eso::mc_price(in.market, in.grant, in.policy,
                                                       n_paths, seed, threads);
                price = mc.estimate;
                std_error = mc.std_error;
            }

            OutStream os(out_path);
            if (*im_cmd) {
                const double per_unit = price / in.grant.M;
                const eso::ImpliedMaturityResult im =
                    eso::implied_maturity(per_unit, in.market);
                if (as_json) {
                    nlohmann::json j{{"method", method_str},
                                     {"grant_cost", price},
                                     {"per_unit_cost", per_unit},
                                     {"implied_maturity", im.t_tilde},
                                     {"residual", im.residual},
                                     {"converged", im.converged},
                                     {"multiple_roots", im.multiple_roots}};
                    os.get() << j.dump(2) << '\n';
                } else {
                    os.get() << std::setprecision(10) << "grant cost      " << price << '\n'
                             << "per-unit cost   " << per_unit << '\n'
                             << "implied maturity " << im.t_tilde << " years"
                             << (im.multiple_roots ? " (smallest of multiple roots)" : "")
                             << '\n';
                }
            } else if (as_json) {
                nlohmann::json j{{"method", method_str}, {"price", price}};
                if (method == eso::Method::Mc) {
                    j["std_error"] = std_error;
                    j["n_paths"] = n_paths;
                    j["seed"] = seed;
                }
                if (!per_m.empty()) j["cost_per_m"] = per_m;
                os.get() << j.dump(2) << '\n';
            } else {
                os.get() << std::setprecision(10) << price;
                if (method == eso::Method::Mc)
                    os.get() << "  (std error " << std::setprecision(4) << std_error << ")";
                os.get() << '\n';
            }
            return 0;
        }

        if (*table_cmd) {
            std::vector<eso::Method> methods;
            std::stringstream ss(methods_csv);
            std::string tok;
            while (std::getline(ss, tok, ',')) methods.push_back(parse_method(tok));
            eso::TableOptions opts;
            opts.mc_paths = n_paths;
            opts.seed = seed;
            opts.threads = threads;
            const eso::TableReport rep = eso::reproduce_table(table_id, methods, opts);
            OutStream os(out_path);
            auto& o = os.get();
            o << "alpha,beta,lambda,stochastic,t_v,fdm,fft,mc,mc_stderr,ref_fdm,"
                 "ref_fft,abs_d_fdm,abs_d_fft,fft_fdm_gap,pass\n";
            o << std::setprecision(10);
            for (const auto& row : rep.rows) {
                const bool pass =
                    row.pass_fft && row.pass_fdm && row.pass_cross && row.pass_mc;
                o << row.cell.alpha << ',' << row.cell.beta << ',' << row.cell.lambda << ','
                  << (row.cell.affine ? 1 : 0) << ',' << row.cell.t_v << ',' << row.fdm
                  << ',' << row.fft << ',' << row.mc << ',' << row.mc_stderr << ','
                  << row.cell.ref_fdm << ',' << row.cell.ref_fft << ','
                  << std::fabs(row.fdm - row.cell.ref_fdm) << ','
                  << std::fabs(row.fft - row.cell.ref_fft) << ','
                  << std::fabs(row.fft - row.fdm) << ',' << (pass ? 1 : 0) << '\n';
            }
            if (check && !rep.all_pass) {
                std::cerr << "table " << table_id << ": tolerance check FAILED\n";
                return 2;
            }
            return 0;
        }

        if (*sweep_cmd) {
            eso::SweepOptions opts;
            opts.method = parse_method(method_str);
            opts.mc_paths = sweep_paths;
            opts.seed = seed;
            opts.threads = threads;
            if (!params_path.empty()) {
                const eso::ModelInputs in = eso::load_params(params_path);
                opts.market = in.market;
                opts.grant = in.grant;
                opts.jumps = in.policy.jump_sizes();
            }
            eso::Series series;
            if (sweep_kind == "lambda") {
                std::vector<double> grid;
                for (double v = lambda_min; v <= lambda_max + 1e-12; v += lambda_step)
                    grid.push_back(v);
                series = eso::sweep_lambda(grid, opts);
            } else if (sweep_kind == "grant") {
                series = eso::sweep_grant_size(m_max, opts);
            } else {
                std::vector<double> grid;
                for (double v = s_min; v <= s_max + 1e-12; v += s_step) grid.push_back(v);
                series = eso::sweep_stock(grid, opts);
            }
            OutStream os(out_path);
            auto& o = os.get();
            for (std::size_t c = 0; c < series.columns.size(); ++c)
                o << series.columns[c] << (c + 1 < series.columns.size() ? ',' : '\n');
            o << std::setprecision(10);
            for (const auto& row : series.rows)
                for (std::size_t c = 0; c < row.size(); ++c)
                    o << row[c] << (c + 1 < row.size() ? ',' : '\n');
            return 0;
        }

        if (*mre_cmd) {
            const eso::ModelInputs in = eso::load_params(params_path);
            std::vector<double> grid;
            for (double v = mr_min; v <= mr_max + 1e-12; v += mr_step) grid.push_back(v);
            const auto rows = eso::mr_error_curve(
                in.market, in.grant, in.policy, grid,
                mr_sweep_kind == "lambda" ? eso::MrSweep::Lambda : eso::MrSweep::Beta);
            OutStream os(out_path);
            auto& o = os.get();
            o << "sweep_value,mr_price,fft_price,abs_error,per_unit_error\n";
            o << std::setprecision(10);
            for (const auto& row : rows)
                o << row.sweep_value << ',' << row.mr_price << ',' << row.fft_price << ','
                  << row.abs_error << ',' << row.per_unit_error << '\n';
            return 0;
        }

        if (*sim_cmd) {
            const eso::ModelInputs in = eso::load_params(params_path);
            OutStream os(out_path);
            auto& o = os.get();
            if (emit_paths > 0) {
                o << "path,event,time,quantity,stock,kind\n";
                o << std::setprecision(10);
                for (std::size_t p = 0; p < emit_paths; ++p) {
                    const eso::ExercisePath path =
                        eso::simulate_path(in.market, in.grant, in.policy, seed + p);
                    if (path.pre_vest_forfeit) {
                        o << p << ",0," << path.settlement_time << ','
                          << in.grant.M << ",0,forfeit\n";
                        continue;
                    }
                    std::size_t e = 0;
                    for (const auto& ev : path.events)
                        o << p << ',' << e++ << ',' << ev.time << ',' << ev.quantity << ','
                          << ev.stock << ",exercise\n";
                    if (path.remaining_at_settlement > 0)
                        o << p << ',' << e << ',' << path.settlement_time << ','
                          << path.remaining_at_settlement << ',' << path.settlement_stock
                          << (path.termination_time ? ",termination\n" : ",maturity\n");
                }
                return 0;
            }
            const std::vector<double> taus = eso::mc_tau_samples(
                in.market, in.grant, in.policy, sim_paths, seed, threads);
            std::size_t forfeited = 0;
            for (double v : taus) forfeited += std::isnan(v) ? 1 : 0;
            const auto bins_out =
                eso::histogram(taus, bins, in.grant.t_v, in.market.T);
            o << "bin_left,bin_right,count\n";
            o << std::setprecision(10);
            for (const auto& b : bins_out)
                o << b.left << ',' << b.right << ',' << b.count << '\n';
            if (forfeited > 0)
                std::cerr << forfeited << " of " << sim_paths
                          << " paths forfeited during vesting (excluded)\n";
            return 0;
        }
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return 1;
    }
    return 0;
}
