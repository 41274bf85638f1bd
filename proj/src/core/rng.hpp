#pragma once

#include <cstdint>
#include <cmath>
#include <string_view>

namespace detours {

// Deterministic PRNG (splitmix64 core). Hand-rolled so output does not
// depend on the standard library's distribution implementations; every
// seeded artifact in the project flows through this.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, n); n > 0.
    int uniform_int(int n) {
        return static_cast<int>(next_u64() % static_cast<uint64_t>(n));
    }

    // Box-Muller, no cached spare (keeps the stream position simple).
    double normal() {
        const double u = 1.0 - uniform();
        const double v = uniform();
        return std::sqrt(-2.0 * std::log(u)) * std::cos(6.283185307179586 * v);
    }

    bool bernoulli(double p) { return uniform() < p; }

    uint64_t state() const { return state_; }
    void set_state(uint64_t s) { state_ = s; }

private:
    uint64_t state_;
};

inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

// Independent substream for (seed, label); used so per-task generation is
// schedule-invariant.
inline Rng derive_rng(uint64_t seed, std::string_view label) {
    Rng mix(seed ^ fnv1a64(label));
    return Rng(mix.next_u64());
}

} // namespace detours
