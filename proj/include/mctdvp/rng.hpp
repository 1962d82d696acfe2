#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>

namespace mctdvp {

// SplitMix64 finalizer; bijective on 64-bit words.
inline std::uint64_t splitmix64_mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
}

// Deterministic Gaussian stream. mt19937_64 output is fixed by the C++
// standard and Box-Muller is implemented here directly, so identical seeds
// give identical draws on any platform. std::normal_distribution would not.
//
// Draw order contract: gaussian_pair() consumes exactly two engine outputs
// (u1 then u2) and returns (r cos, r sin).
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in (0, 1]; never returns 0 so log() below is safe.
    double uniform_open_closed() {
        return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
    }

    // Uniform in [0, 1).
    double uniform_closed_open() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // Two independent standard normals via one Box-Muller transform.
    std::pair<double, double> gaussian_pair() {
        const double u1 = uniform_open_closed();
        const double u2 = uniform_closed_open();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        return {r * std::cos(a), r * std::sin(a)};
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace mctdvp
