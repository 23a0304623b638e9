#pragma once

#include <cmath>
#include <cstdint>
#include <utility>

namespace fasttd3 {

// Counter-based random streams. A draw is a pure function of (key, counter),
// so a stream's output depends only on its identity and position, never on
// how other streams were used. Streams are cheap value types.

inline uint64_t splitmix64(uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

struct RngStream {
    uint64_t key = 0;
    uint64_t counter = 0;

    uint64_t next_u64() { return splitmix64(key + 0xD1B54A32D192ED03ULL * counter++); }

    // uniform double in [0, 1)
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // uniform integer in [0, n); n must be > 0
    uint64_t next_index(uint64_t n) {
        // rejection sampling to avoid modulo bias
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x = next_u64();
        while (x >= limit) x = next_u64();
        return x % n;
    }

    // standard normal via Box-Muller; consumes two draws
    double normal() {
        const double u1 = 1.0 - next_double();  // (0, 1], keeps log finite
        const double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }
};

// Derive an independent stream from (seed, id, purpose). Keys are fully
// avalanched so nearby ids yield uncorrelated streams.
inline RngStream derive_stream(uint64_t seed, uint64_t id, uint64_t purpose = 0) {
    uint64_t key = splitmix64(seed);
    key = splitmix64(key ^ splitmix64(id + 0x9E3779B97F4A7C15ULL));
    key = splitmix64(key ^ splitmix64(purpose + 0x2545F4914F6CDD1DULL));
    return RngStream{key, 0};
}

}  // namespace fasttd3
