#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace ledvlc {

/// SplitMix64 finalizer; used both as a stateless hash and a stream step.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t hash_key(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    return mix64(mix64(mix64(seed) ^ a) ^ (b * 0xd1b54a32d192ed03ULL));
}

/// (0,1) uniform from a 64-bit key; never returns exactly 0.
inline double unit_open(std::uint64_t key) { return (static_cast<double>(key >> 12) + 0.5) * 0x1.0p-52; }

/// Standard normal sample keyed by (seed, counter). Independent of call
/// order, so parallel or partial evaluation reproduces the same field.
inline double counter_normal(std::uint64_t seed, std::uint64_t counter) {
    const double u1 = unit_open(hash_key(seed, counter, 1));
    const double u2 = unit_open(hash_key(seed, counter, 2));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Small portable sequential generator (same output on every platform,
/// unlike std distributions).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(mix64(seed)) {}

    std::uint64_t next() { return mix64(state_++); }

    /// Uniform integer in [0, bound) without modulo bias.
    std::uint64_t below(std::uint64_t bound) {
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
        std::uint64_t v = next();
        while (v >= limit) v = next();
        return v % bound;
    }

    double uniform() { return unit_open(next()); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() {
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::uint64_t state_;
};

}  // namespace ledvlc
