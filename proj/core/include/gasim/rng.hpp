#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace gasim {

/// Deterministic random stream. Every stochastic operation in the project
/// draws from a stream derived (directly or via derive()) from the single
/// configured seed, so a full run is a pure function of its configuration.
///
/// Uniform and normal variates are generated from the raw engine words
/// instead of std::*_distribution, which keeps the produced sequences
/// identical across standard-library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : root_seed_(seed), engine_(scramble(seed)) {}

    std::uint64_t root_seed() const { return root_seed_; }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [0, 1).
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, bound). bound must be positive.
    std::uint64_t uniform_int(std::uint64_t bound) {
        // Rejection sampling to avoid modulo bias.
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % bound;
    }

    /// Standard Box-Muller transform; the second variate is cached.
    double normal(double mean = 0.0, double stddev = 1.0) {
        if (has_spare_) {
            has_spare_ = false;
            return mean + stddev * spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return mean + stddev * r * std::cos(theta);
    }

    /// Independent substream keyed by a tag. Deriving the same tag from the
    /// same parent always yields the same stream; the parent is not advanced.
    Rng derive(std::uint64_t tag) const {
        return Rng(mix(root_seed_, tag));
    }

    Rng derive(std::uint64_t tag_a, std::uint64_t tag_b) const {
        return Rng(mix(mix(root_seed_, tag_a), tag_b));
    }

private:
    // SplitMix64 finalizer; spreads low-entropy seeds over the whole state.
    static std::uint64_t scramble(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
        return scramble(a ^ (0x9e3779b97f4a7c15ULL + (b << 6) + (b >> 2) + b));
    }

    std::uint64_t root_seed_;
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace gasim
