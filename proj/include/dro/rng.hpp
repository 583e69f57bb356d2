#pragma once

#include <cmath>
#include <cstdint>

namespace dro {

/// SplitMix64 step; used for seeding and for hashing stream ids.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/**
 * Reproducible random stream.
 *
 * A (seed, stream_id) pair fully determines the variate sequence, bit for
 * bit, across runs and platforms (integer arithmetic only, no libm calls in
 * the core generator). Distinct stream ids yield statistically independent
 * streams, so each Monte-Carlo replication can own its own stream.
 *
 * Core generator: xoshiro256** seeded through SplitMix64.
 */
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0)
        : seed_(seed), stream_id_(stream_id) {
        // decorrelate seed and stream id before filling the state
        std::uint64_t s = seed ^ 0xd1b54a32d192ed03ULL;
        std::uint64_t mixed = splitmix64_next(s);
        s = mixed ^ (stream_id * 0x9e3779b97f4a7c15ULL + 0xbf58476d1ce4e5b9ULL);
        for (auto& word : state_) word = splitmix64_next(s);
        // all-zero state is invalid for xoshiro
        if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

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

    /// Uniform on (0, 1]; never returns 0 so logarithms are safe.
    double next_uniform() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller (pairs cached; no rejection step).
    double next_gaussian() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        const double u1 = next_uniform();
        const double u2 = next_uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * 3.14159265358979323846 * u2;
        cached_ = r * std::sin(angle);
        have_cached_ = true;
        return r * std::cos(angle);
    }

    /// Exponential with the given mean.
    double next_exponential(double mean) {
        return -mean * std::log(next_uniform());
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::uint64_t state_[4] = {};
    double cached_ = 0.0;
    bool have_cached_ = false;
};

/// Stable 64-bit combiner for deriving stream ids from loop indices.
inline std::uint64_t stream_id_for(std::uint64_t tag, std::uint64_t a, std::uint64_t b = 0) {
    std::uint64_t s = tag * 0x2545f4914f6cdd1dULL + 0x9e3779b97f4a7c15ULL;
    s ^= splitmix64_next(s) + a;
    s ^= splitmix64_next(s) + b;
    return splitmix64_next(s);
}

} // namespace dro
