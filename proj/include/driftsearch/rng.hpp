#pragma once

#include <cmath>
#include <cstdint>

#include "driftsearch/geometry.hpp"

namespace driftsearch {

/// splitmix64 step; used to expand a 64-bit seed into generator state.
inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// xoshiro256++ generator. Deterministic across platforms, cheap to fork
/// into independent substreams by reseeding.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) {
        uint64_t sm = seed;
        for (uint64_t& w : s_) w = splitmix64(sm);
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Pair of independent standard normal draws (Box-Muller).
    Vec2 normal_pair() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * kPi * uniform();
        return {r * std::cos(a), r * std::sin(a)};
    }

private:
    static constexpr uint64_t rotl(uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    uint64_t s_[4];
};

/// Derive an independent stream seed from (base seed, entity index, purpose).
/// Mixing through splitmix64 decorrelates nearby indices.
inline uint64_t substream_seed(uint64_t base, uint64_t index, uint64_t salt) {
    uint64_t s = base ^ (0x632be59bd9b4e019ULL * (index + 1)) ^ (0x9e3779b97f4a7c15ULL * salt);
    return splitmix64(s);
}

}  // namespace driftsearch
