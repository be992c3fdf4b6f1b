#pragma once

#include <cstdint>
#include <random>

namespace taskforge {

// Deterministic RNG used everywhere seedable behaviour is required.
// std::mt19937_64 output is pinned by the standard; the distribution
// classes are not, so the uniform mappings below are done by hand.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // uniform in [0, 1), 53-bit resolution
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform01();
    }

    // uniform integer in [0, n); n must be > 0
    std::uint64_t uniform_int(std::uint64_t n) { return next_u64() % n; }

private:
    std::mt19937_64 engine_;
};

// Stable sub-stream derivation: lets one master seed drive many
// independent consumers without coupling their draw counts.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
    // splitmix64 finalizer over the combined value
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace taskforge
