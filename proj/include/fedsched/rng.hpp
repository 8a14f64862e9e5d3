#pragma once

#include <cmath>
#include <cstdint>

#include "fedsched/errors.hpp"

namespace fedsched {

/// Deterministic random stream: xoshiro256** core seeded from (seed, stream)
/// via splitmix64. Identical (seed, stream) pairs produce identical draw
/// sequences, which is what makes manifests replayable. Streams split into
/// independent child streams for parallel fan-out.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0)
        : seed_(seed), stream_(stream) {
        std::uint64_t x = seed ^ (0x9E3779B97F4A7C15ULL * (stream + 1));
        for (auto& word : state_) word = splitmix64(x);
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

    /// Child stream; distinct ids give statistically independent sequences.
    RngStream split(std::uint64_t child) const {
        std::uint64_t s = stream_;
        s = splitmix_mix(s ^ splitmix_mix(child + 0x632BE59BD9B4E019ULL));
        return RngStream(seed_, s);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform in [0,1) with 53-bit resolution.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + uniform01() * (hi - lo); }

    /// Uniform integer in [0, n), rejection-debiased.
    std::uint64_t uniform_int(std::uint64_t n) {
        require(n > 0, "uniform_int: n must be positive");
        const std::uint64_t limit = (UINT64_MAX / n) * n;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    double exponential(double mean = 1.0) {
        // -log(1-u) keeps 0 out of the log
        return -mean * std::log1p(-uniform01());
    }

    double normal(double mean = 0.0, double stddev = 1.0) {
        // Box-Muller; two fresh uniforms per call, no cached spare
        double u1 = uniform01();
        double u2 = uniform01();
        if (u1 < 1e-300) u1 = 1e-300;
        const double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(6.283185307179586476925286766559 * u2);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    static std::uint64_t splitmix_mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    static std::uint64_t splitmix64(std::uint64_t& x) {
        x += 0x9E3779B97F4A7C15ULL;
        return splitmix_mix(x);
    }

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t state_[4];
};

} // namespace fedsched
