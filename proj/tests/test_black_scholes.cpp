#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "eso/black_scholes.hpp"

using namespace eso;

namespace {

// Frozen oracle: e^{-rT} E[(S_T - K)^+] for S=K=10, r=5%, q=1.5%, sigma=20%,
// T=10, computed by high-precision quadrature of the lognormal payoff density
// before the build. Used as the reference constant across the test suite.
constexpr double kBsOracle = 3.351146565226331;

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }

// Independent route: adaptive Simpson quadrature of the discounted payoff
// against the lognormal density. Never touches bs_call or norm_cdf.
double simpson(double a, double b, int n, double S, double K, double r, double q,
               double sigma, double tau) {
    const double mu = (r - q - 0.5 * sigma * sigma) * tau;
    const double sd = sigma * std::sqrt(tau);
    auto f = [&](double z) {
        const double payoff = S * std::exp(mu + sd * z) - K;
        return (payoff > 0.0 ? payoff : 0.0) * normal_pdf(z);
    };
    const double h = (b - a) / n;
    double acc = f(a) + f(b);
    for (int i = 1; i < n; ++i) acc += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return std::exp(-r * tau) * acc * h / 3.0;
}

}  // namespace

TEST_CASE("quadrature oracle pins the frozen constant") {
    const double zlo = (std::log(1.0) - (0.05 - 0.015 - 0.02) * 10.0) / (0.2 * std::sqrt(10.0));
    const double quad = simpson(zlo, zlo + 40.0, 40000, 10, 10, 0.05, 0.015, 0.2, 10.0);
    CHECK(quad == Catch::Approx(kBsOracle).margin(1e-9));
    CHECK(bs_call(10, 10, 0.05, 0.015, 0.2, 10.0) == Catch::Approx(kBsOracle).margin(1e-12));
}

TEST_CASE("bs_call edge cases") {
    CHECK(bs_call(10, 10, 0.05, 0.015, 0.2, 0.0) == 0.0);
    CHECK(bs_call(0, 10, 0.05, 0.015, 0.2, 10.0) == 0.0);
    CHECK(bs_call(15, 10, 0.05, 0.015, 0.2, 0.0) == 5.0);
    CHECK_THROWS_AS(bs_call(10, 10, 0.05, 0.015, 0.2, -1.0), std::domain_error);
    CHECK_THROWS_AS(bs_call(10, 0.0, 0.05, 0.015, 0.2, 1.0), std::invalid_argument);
}

TEST_CASE("bs_call monotone in S and sigma, convex in S") {
    const double r = 0.05, q = 0.015, tau = 7.0;
    double prev = -1.0;
    for (double S = 2.0; S <= 30.0; S += 0.5) {
        const double v = bs_call(S, 10.0, r, q, 0.2, tau);
        CHECK(v >= prev - 1e-14);
        prev = v;
    }
    prev = -1.0;
    for (double sigma = 0.05; sigma <= 1.0; sigma += 0.05) {
        const double v = bs_call(10.0, 10.0, r, q, sigma, tau);
        CHECK(v >= prev - 1e-14);
        prev = v;
    }
    // convexity by second differences
    const double h = 0.25;
    for (double S = 4.0; S <= 25.0; S += 0.5) {
        const double d2 = bs_call(S + h, 10, r, q, 0.2, tau) -
                          2.0 * bs_call(S, 10, r, q, 0.2, tau) +
                          bs_call(S - h, 10, r, q, 0.2, tau);
        CHECK(d2 >= -1e-12);
    }
}

TEST_CASE("bs_call stays inside the no-arbitrage band") {
    for (double S : {2.0, 8.0, 10.0, 12.0, 40.0}) {
        for (double tau : {0.1, 1.0, 10.0}) {
            const double v = bs_call(S, 10, 0.05, 0.015, 0.2, tau);
            const double lower =
                std::max(S * std::exp(-0.015 * tau) - 10.0 * std::exp(-0.05 * tau), 0.0);
            CHECK(v >= lower - 1e-12);
            CHECK(v <= S * std::exp(-0.015 * tau) + 1e-12);
        }
    }
}

TEST_CASE("norm_cdf and norm_ppf are mutually consistent") {
    for (double p : {1e-10, 1e-4, 0.2, 0.5, 0.9, 1.0 - 1e-6}) {
        CHECK(norm_cdf(norm_ppf(p)) == Catch::Approx(p).epsilon(1e-12));
    }
    CHECK(norm_cdf(0.0) == Catch::Approx(0.5).margin(1e-16));
    CHECK_THROWS_AS(norm_ppf(0.0), std::domain_error);
    CHECK_THROWS_AS(norm_ppf(1.0), std::domain_error);
}
