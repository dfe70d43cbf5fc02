#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <thread>
#include <vector>

#include "eso/model.hpp"
#include "eso/rng.hpp"

namespace eso {

/// One exercise event: when, how many, and the sampled stock level.
struct ExerciseEvent {
    double time;
    int quantity;
    double stock;
};

/**
 * One simulated realization of the grant. When not forfeited, the quantity
 * conservation sum(delta_i) + remaining_at_settlement == M holds and event
 * times are strictly increasing inside [t_v, min(T, t_v + xi)].
 */
struct ExercisePath {
    int total_options = 0;
    std::vector<ExerciseEvent> events;
    std::optional<double> termination_time;  ///< t_v + xi when it forced settlement
    bool pre_vest_forfeit = false;
    double settlement_time = 0.0;            ///< T, termination, last event, or zeta
    int remaining_at_settlement = 0;
    double settlement_stock = 0.0;
    double discounted_payoff = 0.0;
};

/// Quantity-weighted mean exercise time; the forced settlement counts as an
/// exercise of the remaining quantity. Undefined for forfeited paths.
inline double weighted_avg_exercise_time(const ExercisePath& path) {
    if (path.pre_vest_forfeit)
        throw std::domain_error("weighted_avg_exercise_time: path was forfeited");
    double acc = 0.0;
    for (const auto& e : path.events) acc += static_cast<double>(e.quantity) * e.time;
    acc += static_cast<double>(path.remaining_at_settlement) * path.settlement_time;
    return acc / static_cast<double>(path.total_options);
}

namespace detail {

/// Spacing of the thinning checkpoints for state/time dependent intensities.
inline constexpr double kThinningStep = 0.01;

inline int draw_jump(Rng& rng, const JumpSizeDistribution& dist, int m) {
    switch (dist.kind()) {
        case JumpSizeDistribution::Kind::Unit:
            return 1;
        case JumpSizeDistribution::Kind::Uniform: {
            const int z = 1 + static_cast<int>(rng.uniform() * static_cast<double>(m));
            return z > m ? m : z;
        }
        case JumpSizeDistribution::Kind::Custom: {
            const double u = rng.uniform();
            double cum = 0.0;
            for (int z = 1; z < m; ++z) {
                cum += dist.prob(m, z);
                if (u < cum) return z;
            }
            return m;
        }
    }
    return 1;
}

inline ExercisePath simulate_path_impl(const MarketParams& mkt, const GrantSpec& grant,
                                       const ExercisePolicy& pol, Rng& rng) {
    ExercisePath path;
    path.total_options = grant.M;

    const double zeta = rng.exponential(grant.alpha);
    if (zeta < grant.t_v) {
        path.pre_vest_forfeit = true;
        path.settlement_time = zeta;
        path.remaining_at_settlement = grant.M;
        return path;
    }

    const double xi = rng.exponential(grant.beta);
    const double horizon = std::min(mkt.T, grant.t_v + xi);
    const bool terminated = grant.t_v + xi < mkt.T;
    if (terminated) path.termination_time = grant.t_v + xi;

    const double drift = mkt.r - mkt.q - 0.5 * mkt.sigma * mkt.sigma;
    auto gbm_step = [&](double s, double from, double to) {
        if (to <= from) return s;
        const double span = to - from;
        return s * std::exp(drift * span + mkt.sigma * std::sqrt(span) * rng.normal());
    };

    double stock = mkt.S0;
    double stock_time = 0.0;
    if (grant.t_v > 0.0) {
        stock = gbm_step(stock, 0.0, grant.t_v);
        stock_time = grant.t_v;
    }

    const bool single_interval = pol.kind() == ExercisePolicy::Kind::Constant;
    int m = grant.M;
    double t = grant.t_v;
    path.events.reserve(static_cast<std::size_t>(std::min(grant.M, 16)));

    while (m > 0 && t < horizon) {
        double interval_end = horizon;
        if (!single_interval) {
            const auto iv = static_cast<std::uint64_t>(
                std::floor((t - grant.t_v) / kThinningStep + 1e-9));
            interval_end = std::min(
                horizon, grant.t_v + kThinningStep * static_cast<double>(iv + 1));
        }
        const double lam_bar = pol.max_intensity(t, interval_end);
        if (lam_bar <= 0.0) {
            t = interval_end;
            continue;
        }
        const double wait = rng.exponential(lam_bar);
        if (t + wait > interval_end) {
            t = interval_end;
            continue;
        }
        t += wait;
        stock = gbm_step(stock, stock_time, t);
        stock_time = t;
        if (!single_interval) {
            const double lam_here = pol.intensity(t, std::log(stock / mkt.K));
            if (rng.uniform() >= lam_here / lam_bar) continue;
        }
        const int z = draw_jump(rng, pol.jump_sizes(), m);
        path.discounted_payoff +=
            std::exp(-mkt.r * t) * call_payoff(stock, mkt.K) * static_cast<double>(z);
        path.events.push_back({t, z, stock});
        m -= z;
    }

    if (m > 0) {
        stock = gbm_step(stock, stock_time, horizon);
        path.discounted_payoff += std::exp(-mkt.r * horizon) * call_payoff(stock, mkt.K) *
                                  static_cast<double>(m);
        path.settlement_time = horizon;
        path.settlement_stock = stock;
        path.remaining_at_settlement = m;
    } else {
        path.settlement_time = path.events.back().time;
        path.settlement_stock = path.events.back().stock;
        path.remaining_at_settlement = 0;
    }
    return path;
}

/// Deterministic block scheduler: blocks are keyed by index, so the result
/// does not depend on which worker ran which block.
template <typename Fn>
void for_each_block(std::size_t n_items, std::size_t block_size, unsigned n_threads,
                    Fn&& fn) {
    const std::size_t n_blocks = (n_items + block_size - 1) / block_size;
    if (n_threads == 0) {
        const unsigned hw = std::thread::hardware_concurrency();
        n_threads = hw ? hw : 1;
    }
    n_threads = static_cast<unsigned>(
        std::min<std::size_t>(n_threads, std::max<std::size_t>(n_blocks, 1)));
    if (n_threads <= 1) {
        for (std::size_t blk = 0; blk < n_blocks; ++blk)
            fn(blk, blk * block_size, std::min(n_items, (blk + 1) * block_size));
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (unsigned w = 0; w < n_threads; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t blk = next.fetch_add(1);
                if (blk >= n_blocks) return;
                fn(blk, blk * block_size, std::min(n_items, (blk + 1) * block_size));
            }
        });
    }
    for (auto& th : pool) th.join();
}

inline constexpr std::size_t kMcBlock = 4096;

}  // namespace detail

/// Simulate one path from its own seeded stream.
inline ExercisePath simulate_path(const MarketParams& mkt, const GrantSpec& grant,
                                  const ExercisePolicy& pol, std::uint64_t seed) {
    mkt.validate();
    grant.validate(mkt.T);
    Rng rng(seed, 0);
    return detail::simulate_path_impl(mkt, grant, pol, rng);
}

struct McResult {
    double estimate = 0.0;
    double std_error = 0.0;
    std::size_t n_paths = 0;
};

/**
 * Plain Monte Carlo price of the grant (expectation of the discounted payoff
 * at t = 0 with all M options outstanding). Per-path streams are keyed by
 * path index and partial sums are reduced in block order, so the estimate is
 * bit-identical for a fixed (seed, n_paths) regardless of worker count.
 */
inline McResult mc_price(const MarketParams& mkt, const GrantSpec& grant,
                         const ExercisePolicy& pol, std::size_t n_paths,
                         std::uint64_t seed, unsigned n_threads = 0) {
    if (n_paths < 1) throw std::invalid_argument("mc_price: n_paths must be >= 1");
    mkt.validate();
    grant.validate(mkt.T);
    const std::size_t n_blocks = (n_paths + detail::kMcBlock - 1) / detail::kMcBlock;
    std::vector<double> block_sum(n_blocks, 0.0), block_sumsq(n_blocks, 0.0);
    detail::for_each_block(n_paths, detail::kMcBlock, n_threads,
                           [&](std::size_t blk, std::size_t begin, std::size_t end) {
                               double s = 0.0, s2 = 0.0;
                               for (std::size_t i = begin; i < end; ++i) {
                                   Rng rng(seed, i);
                                   const ExercisePath p =
                                       detail::simulate_path_impl(mkt, grant, pol, rng);
                                   s += p.discounted_payoff;
                                   s2 += p.discounted_payoff * p.discounted_payoff;
                               }
                               block_sum[blk] = s;
                               block_sumsq[blk] = s2;
                           });
    double sum = 0.0, sumsq = 0.0, c1 = 0.0, c2 = 0.0;
    for (std::size_t blk = 0; blk < n_blocks; ++blk) {
        const double y1 = block_sum[blk] - c1, t1 = sum + y1;
        c1 = (t1 - sum) - y1;
        sum = t1;
        const double y2 = block_sumsq[blk] - c2, t2 = sumsq + y2;
        c2 = (t2 - sumsq) - y2;
        sumsq = t2;
    }
    McResult res;
    res.n_paths = n_paths;
    res.estimate = sum / static_cast<double>(n_paths);
    const double var =
        std::max(0.0, sumsq / static_cast<double>(n_paths) - res.estimate * res.estimate);
    res.std_error = std::sqrt(var / static_cast<double>(n_paths));
    return res;
}

struct TauBarStats {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t n_valid = 0;      ///< non-forfeited paths
    std::size_t n_forfeited = 0;
};

/// Mean weighted-average exercise time over non-forfeited paths; same
/// deterministic reduction scheme as mc_price.
inline TauBarStats mc_avg_exercise_time(const MarketParams& mkt, const GrantSpec& grant,
                                        const ExercisePolicy& pol, std::size_t n_paths,
                                        std::uint64_t seed, unsigned n_threads = 0) {
    mkt.validate();
    grant.validate(mkt.T);
    const std::size_t n_blocks = (n_paths + detail::kMcBlock - 1) / detail::kMcBlock;
    std::vector<double> bs(n_blocks, 0.0), bs2(n_blocks, 0.0);
    std::vector<std::size_t> bn(n_blocks, 0);
    detail::for_each_block(n_paths, detail::kMcBlock, n_threads,
                           [&](std::size_t blk, std::size_t begin, std::size_t end) {
                               double s = 0.0, s2 = 0.0;
                               std::size_t n = 0;
                               for (std::size_t i = begin; i < end; ++i) {
                                   Rng rng(seed, i);
                                   const ExercisePath p =
                                       detail::simulate_path_impl(mkt, grant, pol, rng);
                                   if (p.pre_vest_forfeit) continue;
                                   const double tb = weighted_avg_exercise_time(p);
                                   s += tb;
                                   s2 += tb * tb;
                                   ++n;
                               }
                               bs[blk] = s;
                               bs2[blk] = s2;
                               bn[blk] = n;
                           });
    double sum = 0.0, sumsq = 0.0;
    std::size_t n_valid = 0;
    for (std::size_t blk = 0; blk < n_blocks; ++blk) {
        sum += bs[blk];
        sumsq += bs2[blk];
        n_valid += bn[blk];
    }
    TauBarStats out;
    out.n_valid = n_valid;
    out.n_forfeited = n_paths - n_valid;
    if (n_valid > 0) {
        out.mean = sum / static_cast<double>(n_valid);
        const double var =
            std::max(0.0, sumsq / static_cast<double>(n_valid) - out.mean * out.mean);
        out.std_error = std::sqrt(var / static_cast<double>(n_valid));
    }
    return out;
}

/// Per-path tau-bar samples (NaN marks forfeited paths); slot per path index,
/// so output is deterministic for any worker count.
inline std::vector<double> mc_tau_samples(const MarketParams& mkt, const GrantSpec& grant,
                                          const ExercisePolicy& pol, std::size_t n_paths,
                                          std::uint64_t seed, unsigned n_threads = 0) {
    mkt.validate();
    grant.validate(mkt.T);
    std::vector<double> out(n_paths);
    detail::for_each_block(n_paths, detail::kMcBlock, n_threads,
                           [&](std::size_t, std::size_t begin, std::size_t end) {
                               for (std::size_t i = begin; i < end; ++i) {
                                   Rng rng(seed, i);
                                   const ExercisePath p =
                                       detail::simulate_path_impl(mkt, grant, pol, rng);
                                   out[i] = p.pre_vest_forfeit
                                                ? std::numeric_limits<double>::quiet_NaN()
                                                : weighted_avg_exercise_time(p);
                               }
                           });
    return out;
}

/// Equal-width histogram over [lo, hi]; columns match the CSV the CLI emits.
struct HistogramBin {
    double left;
    double right;
    std::size_t count;
};

inline std::vector<HistogramBin> histogram(const std::vector<double>& samples,
                                           std::size_t n_bins, double lo, double hi) {
    if (n_bins == 0 || !(hi > lo)) throw std::invalid_argument("histogram: bad bin spec");
    std::vector<HistogramBin> bins(n_bins);
    const double w = (hi - lo) / static_cast<double>(n_bins);
    for (std::size_t b = 0; b < n_bins; ++b)
        bins[b] = {lo + w * static_cast<double>(b), lo + w * static_cast<double>(b + 1), 0};
    for (double v : samples) {
        if (std::isnan(v) || v < lo || v > hi) continue;
        auto b = static_cast<std::size_t>((v - lo) / w);
        if (b >= n_bins) b = n_bins - 1;
        ++bins[b].count;
    }
    return bins;
}

}  // namespace eso
