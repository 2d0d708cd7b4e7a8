#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace fbsde {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
/// A pure function of (counter, key): no state, so any draw can be
/// regenerated from its indices alone.
struct Philox4x32 {
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter generate(Counter ctr, Key key) {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += 0x9E3779B9u;
                key[1] += 0xBB67AE85u;
            }
            const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * ctr[2];
            ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
                   static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
        }
        return ctr;
    }
};

/// Draws keyed by (seed, path, step, stream). Each call to next_* consumes
/// one counter value in the fourth counter word.
class KeyedStream {
public:
    KeyedStream(std::uint64_t seed, std::uint32_t path, std::uint32_t step, std::uint32_t stream)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          ctr_{path, step, stream, 0u} {}

    /// Two uniforms in (0, 1) with 53-bit resolution.
    std::array<double, 2> next_uniform_pair() {
        const auto r = Philox4x32::generate(ctr_, key_);
        ++ctr_[3];
        return {to_unit(r[0], r[1]), to_unit(r[2], r[3])};
    }

    /// Standard normal via Box-Muller (cosine branch).
    double next_normal() {
        const auto [u1, u2] = next_uniform_pair();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Poisson(mean) by sequential inversion; intended for the small
    /// per-step means of a time grid.
    std::int32_t next_poisson(double mean) {
        if (mean <= 0.0) return 0;
        const double u = next_uniform_pair()[0];
        std::int32_t k = 0;
        double p = std::exp(-mean);
        double cdf = p;
        while (u > cdf && p > 0.0) {
            ++k;
            p *= mean / k;
            cdf += p;
        }
        return k;
    }

private:
    static double to_unit(std::uint32_t hi, std::uint32_t lo) {
        const std::uint64_t bits = ((std::uint64_t{hi} << 32) | lo) >> 11;
        return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
    }

    Philox4x32::Key key_;
    Philox4x32::Counter ctr_;
};

}  // namespace fbsde
