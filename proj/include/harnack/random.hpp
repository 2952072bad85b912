#pragma once

// Counter-based random numbers. Every variate is a pure function of
// (seed, stream, path, step, coordinate), so results do not depend on how
// paths are scheduled across threads.

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

namespace harnack {

// Philox4x32-10 (Salmon et al., SC'11).
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static constexpr Counter generate(Counter ctr, Key key) {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kWeyl0;
                key[1] += kWeyl1;
            }
            const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
};

// SplitMix64 finalizer; used to derive independent sub-seeds.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    return mix64(seed ^ mix64(tag + 0x632BE59BD9B4E019ull));
}

namespace detail {

// 53-bit uniform in the open interval (0, 1).
constexpr double open_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = ((std::uint64_t{hi} << 32) | lo) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

} // namespace detail

// Keyed block source: block(path, step, index) returns 128 random bits.
class CounterStream {
public:
    explicit constexpr CounterStream(std::uint64_t seed)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

    constexpr Philox4x32::Counter block(std::uint64_t path, std::uint64_t step, std::uint32_t index) const {
        // step occupies 32 bits plus 16 high bits shared with the block index.
        const auto step_lo = static_cast<std::uint32_t>(step);
        const auto step_hi = static_cast<std::uint32_t>(step >> 32) & 0xFFFFu;
        return Philox4x32::generate(
            {step_lo, (step_hi << 16) | (index & 0xFFFFu), static_cast<std::uint32_t>(path),
             static_cast<std::uint32_t>(path >> 32)},
            key_);
    }

    // Two uniforms in (0,1) from one block.
    std::array<double, 2> uniform_pair(std::uint64_t path, std::uint64_t step, std::uint32_t index) const {
        const auto w = block(path, step, index);
        return {detail::open_unit(w[0], w[1]), detail::open_unit(w[2], w[3])};
    }

    // Two independent standard normals (Box-Muller) from one block.
    std::array<double, 2> normal_pair(std::uint64_t path, std::uint64_t step, std::uint32_t index) const {
        const auto [u1, u2] = uniform_pair(path, step, index);
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        return {r * std::cos(angle), r * std::sin(angle)};
    }

    // Fills out with standard normals for (path, step); coordinate k comes
    // from block k/2.
    void normals(std::uint64_t path, std::uint64_t step, std::span<double> out) const {
        for (std::size_t k = 0; k < out.size(); k += 2) {
            const auto z = normal_pair(path, step, static_cast<std::uint32_t>(k / 2));
            out[k] = z[0];
            if (k + 1 < out.size()) out[k + 1] = z[1];
        }
    }

    void uniforms(std::uint64_t path, std::uint64_t step, std::span<double> out) const {
        for (std::size_t k = 0; k < out.size(); k += 2) {
            const auto u = uniform_pair(path, step, static_cast<std::uint32_t>(k / 2));
            out[k] = u[0];
            if (k + 1 < out.size()) out[k + 1] = u[1];
        }
    }

private:
    Philox4x32::Key key_;
};

// Brownian increments with variance h per coordinate, reproducible from
// (seed, path index, step index) alone.
class NoiseStream {
public:
    explicit NoiseStream(std::uint64_t seed) : stream_(seed), seed_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }

    template <class Vec>
    void increment(std::uint64_t path, std::uint64_t step, double sqrt_h, Vec& out) const {
        const auto d = static_cast<std::size_t>(out.size());
        if (d == 1) {
            out(0) = sqrt_h * stream_.normal_pair(path, step, 0)[0];
            return;
        }
        for (std::size_t k = 0; k < d; k += 2) {
            const auto z = stream_.normal_pair(path, step, static_cast<std::uint32_t>(k / 2));
            out(static_cast<Eigen::Index>(k)) = sqrt_h * z[0];
            if (k + 1 < d) out(static_cast<Eigen::Index>(k + 1)) = sqrt_h * z[1];
        }
    }

private:
    CounterStream stream_;
    std::uint64_t seed_;
};

} // namespace harnack
