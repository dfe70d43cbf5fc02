#pragma once

#include <cstdint>
#include <limits>

#include "eso/math.hpp"

namespace eso {

/// splitmix64 step; used for seeding and stream derivation.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/**
 * xoshiro256++ with deterministic per-stream seeding.
 *
 * Streams are derived by mixing (seed, stream) through splitmix64, so every
 * simulated path gets an independent generator addressable by its index.
 * Output is identical across platforms and thread counts by construction.
 */
class Rng {
public:
    Rng(std::uint64_t seed, std::uint64_t stream) {
        std::uint64_t sm = seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
        for (auto& word : s_) word = splitmix64(sm);
    }

    std::uint64_t next() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform on (0,1), never exactly 0 or 1.
    double uniform() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53 + 0x1.0p-54;
    }

    /// Standard normal via inverse CDF (one uniform per draw).
    double normal() { return norm_ppf(uniform()); }

    /// Exponential with given rate; rate <= 0 yields +infinity (no event).
    double exponential(double rate) {
        if (rate <= 0.0) return std::numeric_limits<double>::infinity();
        return -std::log(uniform()) / rate;
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }
    std::uint64_t s_[4];
};

}  // namespace eso
