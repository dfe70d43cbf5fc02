#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "eso/black_scholes.hpp"
#include "eso/fft_engine.hpp"
#include "eso/simulation.hpp"

using namespace eso;

namespace {

const MarketParams kMkt{10.0, 10.0, 0.05, 0.015, 0.2, 10.0};

FftEngine make_engine(double lambda, double beta, double alpha, double t_v, int M = 5) {
    return FftEngine(kMkt, GrantSpec{M, t_v, alpha, beta},
                     ExercisePolicy::constant(lambda, JumpSizeDistribution::uniform()));
}

double price_at_spot(const CostSurface& surf, int m, double s) {
    return surf.value_at(m, 0, s);
}

}  // namespace

TEST_CASE("spectral round trip recovers the payoff") {
    const auto engine = make_engine(1.0, 0.0, 0.0, 0.0);
    const auto spec = engine.payoff_transform();
    const auto back = engine.inverse_transform(spec);
    const auto& grid = engine.grid();
    for (std::size_t i = 0; i < grid.n_x; ++i) {
        const double expect = call_payoff(kMkt.K * std::exp(grid.x(i)), kMkt.K);
        CHECK(std::fabs(back[i] - expect) <= 1e-10 * std::max(1.0, expect));
    }
}

TEST_CASE("payoff transform DC term is the grid sum") {
    const auto engine = make_engine(1.0, 0.0, 0.0, 0.0);
    const auto spec = engine.payoff_transform();
    const auto& grid = engine.grid();
    double sum = 0.0;
    for (std::size_t i = 0; i < grid.n_x; ++i)
        sum += call_payoff(kMkt.K * std::exp(grid.x(i)), kMkt.K);
    CHECK(spec[0].real() == Catch::Approx(grid.dx() * sum).epsilon(1e-12));
    CHECK(std::fabs(spec[0].imag()) <= 1e-12 * grid.dx() * sum);
}

TEST_CASE("payoff transform matches a direct DFT sum") {
    const auto engine = make_engine(1.0, 0.0, 0.0, 0.0);
    const auto spec = engine.payoff_transform();
    const auto& grid = engine.grid();
    std::vector<double> payoff(grid.n_x);
    for (std::size_t i = 0; i < grid.n_x; ++i)
        payoff[i] = call_payoff(kMkt.K * std::exp(grid.x(i)), kMkt.K);
    double max_ref = 0.0, max_err = 0.0;
    for (std::size_t k = 0; k < grid.n_x; ++k) {
        long double re = 0.0L, im = 0.0L;
        for (std::size_t n = 0; n < grid.n_x; ++n) {
            const long double ang =
                -static_cast<long double>(grid.omega(k)) * grid.x(n);
            re += payoff[n] * std::cos(ang);
            im += payoff[n] * std::sin(ang);
        }
        const std::complex<double> direct(static_cast<double>(re) * grid.dx(),
                                          static_cast<double>(im) * grid.dx());
        max_ref = std::max(max_ref, std::abs(direct));
        max_err = std::max(max_err, std::abs(direct - spec[k]));
    }
    CHECK(max_err <= 1e-9 * max_ref);
}

TEST_CASE("transforms keep conjugate symmetry") {
    const auto engine = make_engine(1.0, 0.0, 0.0, 0.0);
    const auto spec = engine.payoff_transform();
    CHECK(FftEngine::conjugate_symmetry_error(spec) <= 1e-10);
    // evolved state: exp(-h tau) * m phi stays symmetric because h(-w) = conj h(w)
    const auto& grid = engine.grid();
    std::vector<std::complex<double>> evolved(grid.n_x);
    for (std::size_t k = 0; k < grid.n_x; ++k) {
        const double w = grid.omega(k);
        const std::complex<double> h{0.05 + 1.0 + 0.5 * 0.04 * w * w,
                                     -w * (0.05 - 0.015 - 0.02)};
        evolved[k] = 5.0 * spec[k] * std::exp(-10.0 * h);
    }
    CHECK(FftEngine::conjugate_symmetry_error(evolved) <= 1e-10);
}

TEST_CASE("terminal slice equals the payoff") {
    const auto engine = make_engine(1.0, 0.0, 0.1, 0.0);
    const CostSurface surf = engine.solve_vested_constant({kMkt.T});
    const auto& grid = engine.grid();
    for (int m = 1; m <= 5; ++m)
        for (std::size_t i = 0; i < grid.n_x; ++i) {
            const double expect = m * call_payoff(kMkt.K * std::exp(grid.x(i)), kMkt.K);
            CHECK(std::fabs(surf.at(m, 0, i) - expect) <= 1e-8 * std::max(1.0, expect));
        }
}

TEST_CASE("constant-intensity closed form reproduces reference values") {
    CHECK(price_at_spot(make_engine(1.0, 0.0, 0.1, 0.0).solve_vested_constant(), 5, 10.0) ==
          Catch::Approx(5.4753).margin(1e-3));
    CHECK(price_at_spot(make_engine(2.0, 0.0, 0.1, 0.0).solve_vested_constant(), 5, 10.0) ==
          Catch::Approx(3.7101).margin(1e-3));
}

TEST_CASE("unvested propagation reproduces reference values") {
    {
        const auto engine = make_engine(1.0, 0.1, 1.0, 4.0);
        const CostSurface vested = engine.solve_vested_constant({4.0});
        const CostSurface unv = engine.solve_unvested(vested, {0.0});
        CHECK(price_at_spot(unv, 5, 10.0) == Catch::Approx(0.2226).margin(1e-3));
    }
    {
        const auto engine = make_engine(1.0, 0.1, 0.0, 4.0);
        const CostSurface vested = engine.solve_vested_constant({4.0});
        const CostSurface unv = engine.solve_unvested(vested, {0.0});
        CHECK(price_at_spot(unv, 5, 10.0) == Catch::Approx(12.1517).margin(1e-3));
    }
}

TEST_CASE("very large pre-vesting termination kills the whole surface") {
    const auto engine = make_engine(1.0, 0.1, 1e3, 4.0);
    const CostSurface vested = engine.solve_vested_constant({4.0});
    const CostSurface unv = engine.solve_unvested(vested, {0.0});
    double worst = 0.0;
    for (int m = 1; m <= 5; ++m)
        for (std::size_t i = 0; i < unv.n_space(); ++i)
            worst = std::max(worst, unv.at(m, 0, i));
    CHECK(worst <= 1e-6);
}

TEST_CASE("t_v = 0 unvested stage is the identity") {
    const auto engine = make_engine(1.0, 0.1, 0.3, 0.0);
    const CostSurface vested = engine.solve_vested_constant({0.0});
    const CostSurface same = engine.solve_unvested(vested, {0.0});
    CHECK(same.value_at(5, 0, 10.0) == vested.value_at(5, 0, 10.0));
}

TEST_CASE("time-stepped solver agrees with the closed form") {
    const GrantSpec grant{5, 0.0, 0.1, 0.0};
    const auto jumps = JumpSizeDistribution::uniform();
    const FftEngine closed(kMkt, grant, ExercisePolicy::constant(1.0, jumps));
    const FftEngine stepped(
        kMkt, grant,
        ExercisePolicy::time_dependent([](double) { return 1.0; }, jumps, 0.0, 10.0));
    const CostSurface a = closed.solve_vested_constant();
    const CostSurface b = stepped.solve_vested_timedep();
    const auto& grid = closed.grid();
    double worst = 0.0;
    for (int m = 1; m <= 5; ++m)
        for (std::size_t i = 0; i < grid.n_x; ++i)
            if (std::fabs(grid.x(i)) <= FftEngine::kReportX)
                worst = std::max(worst, std::fabs(a.at(m, 0, i) - b.at(m, 0, i)));
    CHECK(worst <= 1e-6);
}

TEST_CASE("zero intensity and termination reduce to Black-Scholes") {
    const GrantSpec grant{1, 0.0, 0.0, 0.0};
    const auto jumps = JumpSizeDistribution::unit();
    const FftEngine engine(
        kMkt, grant,
        ExercisePolicy::time_dependent([](double) { return 0.0; }, jumps, 0.0, 10.0));
    const CostSurface surf = engine.solve_vested_timedep();
    for (double s : {9.0, 10.0, 11.0}) {
        const double oracle = bs_call(s, 10.0, 0.05, 0.015, 0.2, 10.0);
        CHECK(surf.value_at(1, 0, s) == Catch::Approx(oracle).margin(1e-3));
    }
}

TEST_CASE("piecewise intensity agrees with Monte Carlo") {
    const GrantSpec grant{5, 0.0, 0.0, 0.1};
    const auto jumps = JumpSizeDistribution::uniform();
    auto lam = [](double t) { return t < 5.0 ? 2.0 : 0.0; };
    const auto pol = ExercisePolicy::time_dependent(lam, jumps, 0.0, 10.0);
    const FftEngine engine(kMkt, grant, pol);
    const double fft = engine.solve_vested_timedep().value_at(5, 0, 10.0);
    const McResult mc = mc_price(kMkt, grant, pol, 100000, 12);
    CHECK(std::fabs(fft - mc.estimate) <= 3.0 * mc.std_error);
}

TEST_CASE("affine solver with zero slope matches the constant solver") {
    const GrantSpec grant{5, 0.0, 0.0, 0.1};
    const auto jumps = JumpSizeDistribution::uniform();
    const FftEngine cst(kMkt, grant, ExercisePolicy::constant(0.2, jumps));
    const FftEngine aff(kMkt, grant, ExercisePolicy::affine(0.2, 0.0, jumps));
    const CostSurface a = cst.solve_vested_constant();
    const CostSurface b = aff.solve_vested_affine();
    const auto& grid = cst.grid();
    double worst = 0.0;
    for (int m = 1; m <= 5; ++m)
        for (std::size_t i = 0; i < grid.n_x; ++i)
            if (std::fabs(grid.x(i)) <= FftEngine::kReportX)
                worst = std::max(worst, std::fabs(a.at(m, 0, i) - b.at(m, 0, i)));
    CHECK(worst <= 1e-6);
}

TEST_CASE("affine solver reproduces the stochastic-intensity table cells") {
    const auto jumps = JumpSizeDistribution::uniform();
    const auto pol = ExercisePolicy::affine(0.2, 0.02, jumps);
    {
        const FftEngine engine(kMkt, GrantSpec{5, 1.0, 0.0, 0.0}, pol);
        CHECK(engine.price() == Catch::Approx(12.8379).margin(0.02));
    }
    {
        const FftEngine engine(kMkt, GrantSpec{5, 2.0, 0.1, 0.5}, pol);
        CHECK(engine.price() == Catch::Approx(7.8946).margin(0.02));
    }
}

TEST_CASE("cost surfaces are nonnegative and monotone in m") {
    const auto engine = make_engine(1.0, 0.1, 0.0, 0.0);
    const CostSurface surf = engine.solve_vested_constant();
    const auto& grid = engine.grid();
    for (int m = 1; m <= 5; ++m)
        for (std::size_t i = 0; i < grid.n_x; ++i) CHECK(surf.at(m, 0, i) >= 0.0);
    for (int m = 2; m <= 5; ++m)
        for (std::size_t i = 0; i < grid.n_x; ++i) {
            const double diff = surf.at(m, 0, i) - surf.at(m - 1, 0, i);
            const double ax = std::fabs(grid.x(i));
            if (ax <= FftEngine::kReportX) CHECK(diff >= -1e-8);
            else if (ax <= 5.0) CHECK(diff >= -1e-6);
        }
}

TEST_CASE("halving the time step barely moves the stepped price") {
    const GrantSpec grant{5, 0.0, 0.1, 0.0};
    const auto jumps = JumpSizeDistribution::uniform();
    const auto pol =
        ExercisePolicy::time_dependent([](double) { return 1.0; }, jumps, 0.0, 10.0);
    SpectralGrid fine;
    fine.dt = 0.005;
    const double coarse =
        FftEngine(kMkt, grant, pol).solve_vested_timedep().value_at(5, 0, 10.0);
    const double refined =
        FftEngine(kMkt, grant, pol, fine).solve_vested_timedep().value_at(5, 0, 10.0);
    CHECK(std::fabs(coarse - refined) <= 1e-4);
}

TEST_CASE("record times must sit on step levels for stepped solvers") {
    const GrantSpec grant{5, 0.0, 0.1, 0.0};
    const auto jumps = JumpSizeDistribution::uniform();
    const auto pol =
        ExercisePolicy::time_dependent([](double) { return 1.0; }, jumps, 0.0, 10.0);
    const FftEngine engine(kMkt, grant, pol);
    CHECK_THROWS_AS(engine.solve_vested_timedep({5.0055}), std::domain_error);
    CHECK_NOTHROW(engine.solve_vested_timedep({5.0, 0.0}));
}

TEST_CASE("closed form records multiple time levels") {
    const auto engine = make_engine(1.0, 0.0, 0.1, 0.0);
    const CostSurface surf = engine.solve_vested_constant({0.0, 5.0, 10.0});
    REQUIRE(surf.times.size() == 3);
    // cost shrinks as less lifetime remains
    CHECK(surf.value_at(5, 2, 10.0) <= surf.value_at(5, 1, 10.0));
    CHECK(surf.value_at(5, 1, 10.0) <= surf.value_at(5, 0, 10.0));
}
