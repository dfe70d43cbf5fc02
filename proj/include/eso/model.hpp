#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "eso/math.hpp"

namespace eso {

/// Undiscounted call payoff (s - strike)^+.
inline double call_payoff(double s, double strike) { return pos_part(s - strike); }

/**
 * Stock dynamics and contract economics. All types in this header are
 * immutable after construction/validation and safe to share across threads.
 */
struct MarketParams {
    double S0 = 10.0;     ///< initial stock price
    double K = 10.0;      ///< strike, > 0
    double r = 0.05;      ///< risk-free rate (1/year)
    double q = 0.015;     ///< dividend yield (1/year)
    double sigma = 0.2;   ///< volatility (1/sqrt(year)), > 0
    double T = 10.0;      ///< contract maturity (years), > 0

    void validate() const {
        if (!(K > 0.0)) throw std::invalid_argument("MarketParams: K must be > 0");
        if (!(sigma > 0.0)) throw std::invalid_argument("MarketParams: sigma must be > 0");
        if (!(T > 0.0)) throw std::invalid_argument("MarketParams: T must be > 0");
        if (S0 < 0.0) throw std::invalid_argument("MarketParams: S0 must be >= 0");
        if (r < 0.0 || q < 0.0) throw std::invalid_argument("MarketParams: r, q must be >= 0");
    }
};

/// Grant size, vesting time, and the pre-/post-vesting termination rates.
struct GrantSpec {
    int M = 5;            ///< number of options, >= 1
    double t_v = 0.0;     ///< vesting time, 0 <= t_v <= T
    double alpha = 0.0;   ///< pre-vesting termination intensity
    double beta = 0.0;    ///< post-vesting termination intensity

    void validate(double contract_maturity) const {
        if (M < 1) throw std::invalid_argument("GrantSpec: M must be >= 1");
        if (t_v < 0.0 || t_v > contract_maturity)
            throw std::invalid_argument("GrantSpec: t_v must be in [0, T]");
        if (alpha < 0.0 || beta < 0.0)
            throw std::invalid_argument("GrantSpec: alpha, beta must be >= 0");
    }
};

/**
 * Jump-size distribution p_{m,z}: probability of exercising z options at an
 * event when m remain. Unit and uniform kinds are closed-form for any m;
 * a custom table covers m = 1..table.size(). Rows are validated to sum to 1
 * within 1e-12 at construction.
 */
class JumpSizeDistribution {
public:
    enum class Kind { Unit, Uniform, Custom };

    static JumpSizeDistribution unit() { return JumpSizeDistribution(Kind::Unit, {}); }
    static JumpSizeDistribution uniform() { return JumpSizeDistribution(Kind::Uniform, {}); }

    static JumpSizeDistribution custom(std::vector<std::vector<double>> table) {
        if (table.empty())
            throw std::invalid_argument("JumpSizeDistribution: custom table is empty");
        for (std::size_t m = 0; m < table.size(); ++m) {
            if (table[m].size() != m + 1)
                throw std::invalid_argument(
                    "JumpSizeDistribution: row " + std::to_string(m + 1) + " must have " +
                    std::to_string(m + 1) + " entries");
            double sum = 0.0;
            for (double p : table[m]) {
                if (p < 0.0)
                    throw std::invalid_argument("JumpSizeDistribution: negative probability");
                sum += p;
            }
            if (std::fabs(sum - 1.0) > 1e-12)
                throw std::invalid_argument(
                    "JumpSizeDistribution: row " + std::to_string(m + 1) +
                    " sums to " + std::to_string(sum) + ", must be 1 within 1e-12");
        }
        return JumpSizeDistribution(Kind::Custom, std::move(table));
    }

    Kind kind() const { return kind_; }

    /// Largest m the distribution can serve (unbounded for unit/uniform).
    int max_count() const {
        return kind_ == Kind::Custom ? static_cast<int>(table_.size())
                                     : std::numeric_limits<int>::max();
    }

    /// p_{m,z} for 1 <= z <= m.
    double prob(int m, int z) const {
        check_m(m);
        if (z < 1 || z > m) return 0.0;
        switch (kind_) {
            case Kind::Unit: return z == 1 ? 1.0 : 0.0;
            case Kind::Uniform: return 1.0 / static_cast<double>(m);
            case Kind::Custom: return table_[static_cast<std::size_t>(m - 1)]
                                            [static_cast<std::size_t>(z - 1)];
        }
        return 0.0;
    }

    /// Expected jump size pbar_m = sum_z z p_{m,z}.
    double expected_jump(int m) const {
        check_m(m);
        switch (kind_) {
            case Kind::Unit: return 1.0;
            case Kind::Uniform: return (static_cast<double>(m) + 1.0) * 0.5;
            case Kind::Custom: {
                double s = 0.0;
                const auto& row = table_[static_cast<std::size_t>(m - 1)];
                for (int z = 1; z <= m; ++z)
                    s += static_cast<double>(z) * row[static_cast<std::size_t>(z - 1)];
                return s;
            }
        }
        return 0.0;
    }

private:
    JumpSizeDistribution(Kind kind, std::vector<std::vector<double>> table)
        : kind_(kind), table_(std::move(table)) {}

    void check_m(int m) const {
        if (m < 1 || m > max_count())
            throw std::domain_error("JumpSizeDistribution: m out of range");
    }

    Kind kind_;
    std::vector<std::vector<double>> table_;
};

/// pbar_m; throws std::domain_error for m outside the distribution's range.
inline double expected_jump_size(const JumpSizeDistribution& dist, int m) {
    return dist.expected_jump(m);
}

/**
 * Exercise intensity specification plus the jump-size distribution.
 *
 * Three intensity kinds: a constant rate, a deterministic function of time,
 * and the affine log-moneyness form lambda(t,x) = A(t) - B(t) x. The affine
 * form is validated nonnegative over the truncated log-moneyness domain
 * [x_min, x_max] at construction; evaluation clamps x into that domain
 * (the truncation is inherited from the spectral scheme).
 */
class ExercisePolicy {
public:
    enum class Kind { Constant, TimeDependent, Affine };

    static ExercisePolicy constant(double lambda, JumpSizeDistribution jumps) {
        if (lambda < 0.0) throw std::invalid_argument("ExercisePolicy: lambda must be >= 0");
        ExercisePolicy p(Kind::Constant, std::move(jumps));
        p.a_ = [lambda](double) { return lambda; };
        p.b_ = [](double) { return 0.0; };
        p.const_lambda_ = lambda;
        return p;
    }

    static ExercisePolicy time_dependent(std::function<double(double)> lambda_t,
                                         JumpSizeDistribution jumps,
                                         double t_lo, double t_hi) {
        if (!lambda_t) throw std::invalid_argument("ExercisePolicy: null intensity function");
        for (int i = 0; i <= 1000; ++i) {
            const double t = t_lo + (t_hi - t_lo) * i / 1000.0;
            if (lambda_t(t) < -1e-12)
                throw std::invalid_argument("ExercisePolicy: lambda(t) negative at t=" +
                                            std::to_string(t));
        }
        ExercisePolicy p(Kind::TimeDependent, std::move(jumps));
        p.a_ = std::move(lambda_t);
        p.b_ = [](double) { return 0.0; };
        return p;
    }

    static ExercisePolicy affine(double a, double b, JumpSizeDistribution jumps,
                                 double x_min = -10.0, double x_max = 10.0) {
        return affine([a](double) { return a; }, [b](double) { return b; },
                      std::move(jumps), 0.0, 0.0, x_min, x_max);
    }

    static ExercisePolicy affine(std::function<double(double)> a_t,
                                 std::function<double(double)> b_t,
                                 JumpSizeDistribution jumps,
                                 double t_lo, double t_hi,
                                 double x_min = -10.0, double x_max = 10.0) {
        if (!a_t || !b_t) throw std::invalid_argument("ExercisePolicy: null coefficient function");
        if (!(x_min < x_max)) throw std::invalid_argument("ExercisePolicy: x_min < x_max required");
        const int n_scan = (t_hi > t_lo) ? 1000 : 0;
        for (int i = 0; i <= n_scan; ++i) {
            const double t = n_scan ? t_lo + (t_hi - t_lo) * i / n_scan : t_lo;
            const double a = a_t(t), b = b_t(t);
            if (a - b * x_min < -1e-12 || a - b * x_max < -1e-12)
                throw std::invalid_argument(
                    "ExercisePolicy: A(t) - B(t) x negative on the truncated domain at t=" +
                    std::to_string(t));
        }
        ExercisePolicy p(Kind::Affine, std::move(jumps));
        p.a_ = std::move(a_t);
        p.b_ = std::move(b_t);
        p.x_min_ = x_min;
        p.x_max_ = x_max;
        return p;
    }

    Kind kind() const { return kind_; }
    const JumpSizeDistribution& jump_sizes() const { return jumps_; }
    double x_min() const { return x_min_; }
    double x_max() const { return x_max_; }

    /// Constant rate; throws if the policy is not the constant kind.
    double constant_lambda() const {
        if (kind_ != Kind::Constant)
            throw std::logic_error("ExercisePolicy: not a constant intensity");
        return const_lambda_;
    }

    double a(double t) const { return a_(t); }
    double b(double t) const { return b_(t); }

    /// Intensity at time t and log-moneyness x = ln(s/K); x is clamped to the
    /// truncated domain for the affine kind.
    double intensity(double t, double x) const {
        if (kind_ != Kind::Affine) return a_(t);
        const double xc = std::clamp(x, x_min_, x_max_);
        return pos_part(a_(t) - b_(t) * xc);
    }

    /// Upper bound for the intensity over [t0, t1] x domain, used as the
    /// thinning majorant. Time dependence is scanned at the endpoints and
    /// midpoint, which is exact for the constant / piecewise-constant /
    /// monotone coefficient functions this engine works with.
    double max_intensity(double t0, double t1) const {
        if (kind_ == Kind::Constant) return const_lambda_;
        double best = 0.0;
        for (double t : {t0, 0.5 * (t0 + t1), t1}) {
            if (kind_ == Kind::TimeDependent) {
                best = std::max(best, a_(t));
            } else {
                const double a = a_(t), b = b_(t);
                best = std::max(best, std::max(a - b * x_min_, a - b * x_max_));
            }
        }
        return pos_part(best);
    }

private:
    ExercisePolicy(Kind kind, JumpSizeDistribution jumps)
        : kind_(kind), jumps_(std::move(jumps)) {}

    Kind kind_;
    JumpSizeDistribution jumps_;
    std::function<double(double)> a_;
    std::function<double(double)> b_;
    double const_lambda_ = 0.0;
    double x_min_ = -10.0;
    double x_max_ = 10.0;
};

/**
 * Per-remaining-count cost surfaces C^(m)(t, s) on a shared grid.
 *
 * The space grid is uniform either in the stock price itself (FDM) or in
 * log-moneyness x = ln(s/K) (spectral); interpolation happens in the native
 * coordinate. Values are stored for m = 1..m_max, one block per recorded
 * time level.
 */
struct CostSurface {
    enum class SpaceKind { Spot, LogMoneyness };

    int m_max = 0;
    double strike = 0.0;
    SpaceKind kind = SpaceKind::Spot;
    std::vector<double> times;    ///< recorded time levels, ascending
    std::vector<double> coords;   ///< s_j (Spot) or x_j (LogMoneyness), uniform
    std::vector<double> values;   ///< [m-1][time][coord], row-major

    std::size_t n_space() const { return coords.size(); }
    std::size_t n_time() const { return times.size(); }

    double spot(std::size_t j) const {
        return kind == SpaceKind::Spot ? coords[j] : strike * std::exp(coords[j]);
    }

    double at(int m, std::size_t t_idx, std::size_t j) const {
        return values[index(m, t_idx, j)];
    }
    double& at(int m, std::size_t t_idx, std::size_t j) {
        return values[index(m, t_idx, j)];
    }

    /// Linear interpolation in the native coordinate at stock price s.
    double value_at(int m, std::size_t t_idx, double s) const {
        if (m < 1 || m > m_max) throw std::domain_error("CostSurface: m out of range");
        if (s <= 0.0 && kind == SpaceKind::LogMoneyness) return 0.0;
        const double c = (kind == SpaceKind::Spot) ? s : std::log(s / strike);
        const double lo = coords.front(), hi = coords.back();
        if (c <= lo) return at(m, t_idx, 0);
        if (c >= hi) return at(m, t_idx, coords.size() - 1);
        const double step = (hi - lo) / static_cast<double>(coords.size() - 1);
        const double pos = (c - lo) / step;
        const auto i0 = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(i0);
        return (1.0 - frac) * at(m, t_idx, i0) + frac * at(m, t_idx, i0 + 1);
    }

    /// Index of the recorded time level equal to t (within tolerance).
    std::size_t time_index(double t) const {
        for (std::size_t i = 0; i < times.size(); ++i)
            if (std::fabs(times[i] - t) <= 1e-9) return i;
        throw std::domain_error("CostSurface: time level not recorded");
    }

private:
    std::size_t index(int m, std::size_t t_idx, std::size_t j) const {
        return (static_cast<std::size_t>(m - 1) * times.size() + t_idx) * coords.size() + j;
    }
};

}  // namespace eso
