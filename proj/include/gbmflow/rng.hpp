#pragma once

// Reproducible random streams. Every Monte Carlo path owns one stream,
// derived from (master_seed, stream_index) by 64-bit avalanche mixing, so
// results never depend on how paths are scheduled across threads.

#include <array>
#include <cstdint>
#include <limits>

#include <boost/random/exponential_distribution.hpp>
#include <boost/random/normal_distribution.hpp>

namespace gbmflow {

/// SplitMix64 finalizer (Stafford variant 13); a bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

struct RngSpec {
    std::uint64_t master_seed = 0;
    std::uint64_t stream_index = 0;

    RngSpec with_stream(std::uint64_t index) const noexcept { return {master_seed, index}; }
};

/// xoshiro256** by Blackman and Vigna; satisfies UniformRandomBitGenerator.
class Xoshiro256 {
public:
    using result_type = std::uint64_t;

    explicit Xoshiro256(const RngSpec& spec) noexcept;
    /// Raw state; must not be all zero.
    explicit Xoshiro256(const std::array<std::uint64_t, 4>& state) noexcept : s_(state) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        const std::uint64_t out = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return out;
    }

    const std::array<std::uint64_t, 4>& state() const noexcept { return s_; }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

    std::array<std::uint64_t, 4> s_{};
};

/// Engine plus the draws the simulators need.
class RandomStream {
public:
    explicit RandomStream(const RngSpec& spec) : engine_(spec) {}

    double normal() { return normal_(engine_); }
    /// Exponential waiting time with the given rate; +inf when rate == 0.
    double exponential(double rate) {
        if (rate == 0.0) return std::numeric_limits<double>::infinity();
        return exp_(engine_) / rate;
    }
    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    Xoshiro256& engine() noexcept { return engine_; }

private:
    Xoshiro256 engine_;
    boost::random::normal_distribution<double> normal_{0.0, 1.0};
    boost::random::exponential_distribution<double> exp_{1.0};
};

}  // namespace gbmflow
