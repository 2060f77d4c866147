#pragma once

#include <cstdint>
#include <random>

#include "cns/field.hpp"

namespace cns {

/// Deterministic Gaussian stream. Draws are mt19937_64 uniforms fed through an
/// explicit Box-Muller pair, so sequences are bit-stable across platforms and
/// standard library versions.
class RngStream {
public:
    explicit RngStream(uint64_t seed) : engine_(seed) {}

    double uniform() {
        // 53-bit mantissa in [0, 1).
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle  = 6.283185307179586476925286766559 * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    void fill_normal(Field& field) {
        for (int i = 0; i < field.size(); ++i) field[i] = normal();
    }

    /// Uniform integer in [0, n).
    uint64_t below(uint64_t n) {
        // Modulo bias is irrelevant at the n << 2^64 scales used here.
        return engine_() % n;
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// splitmix64; used to decorrelate derived seeds.
inline uint64_t mix_seed(uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Counter-based stream split: stream k of a root seed is seeded with
/// mix(root + (k+1) * odd-constant), so chains are independent of thread
/// scheduling and of how many chains run.
inline RngStream chain_stream(uint64_t root_seed, uint64_t chain_index) {
    return RngStream(mix_seed(root_seed + (chain_index + 1) * 0xD1B54A32D192ED03ull));
}

}  // namespace cns
