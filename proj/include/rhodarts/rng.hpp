// rng.hpp
// Counter-based random streams (Philox4x32-10) with named substreams.
//
// Every stochastic component draws from its own Stream, derived from a single
// master seed and a stream name:
//
//   key     = (lo32(mix), hi32(mix)),  mix = splitmix64(seed ^ fnv1a64(name))
//   counter = (block index, 0, 0, 0)
//
// Each Philox block yields four 32-bit words. Doubles take 53 bits built from
// two consecutive words. Distributions are implemented here rather than via
// <random> so that streams are identical across standard libraries.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace rhodarts {

inline constexpr std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Philox4x32 with 10 rounds.
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t kMul0 = 0xD2511F53u, kMul1 = 0xCD9E8D57u;
    constexpr std::uint32_t kWeyl0 = 0x9E3779B9u, kWeyl1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
        const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    return ctr;
}

class Stream {
public:
    Stream(std::uint64_t seed, std::string_view name) {
        const std::uint64_t k = splitmix64(seed ^ fnv1a64(name));
        key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
    }

    std::uint32_t next_u32() {
        if (lane_ == 4) {
            block_ = philox4x32({static_cast<std::uint32_t>(counter_),
                                 static_cast<std::uint32_t>(counter_ >> 32), 0u, 0u},
                                key_);
            ++counter_;
            lane_ = 0;
        }
        return block_[lane_++];
    }

    std::uint64_t next_u64() {
        const std::uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform on the open interval (0, 1).
    double uniform_open() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, bound).
    std::uint64_t below(std::uint64_t bound) {
        // Lemire-style rejection keeps the draw unbiased.
        const std::uint64_t limit = -bound % bound;
        for (;;) {
            const std::uint64_t x = next_u64();
            const unsigned __int128 prod = static_cast<unsigned __int128>(x) * bound;
            if (static_cast<std::uint64_t>(prod) >= limit) {
                return static_cast<std::uint64_t>(prod >> 64);
            }
        }
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Standard normal via Box-Muller; one value per call.
    double normal() {
        const double u1 = uniform_open();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Standard Gumbel variate, -ln(-ln U).
    double gumbel() { return -std::log(-std::log(uniform_open())); }

private:
    std::array<std::uint32_t, 2> key_{};
    std::array<std::uint32_t, 4> block_{};
    std::uint64_t counter_ = 0;
    int lane_ = 4;
};

}  // namespace rhodarts
