#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace eadf {

/// Portable random source for simulated streams.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. Distributions are implemented here rather than taken from
/// <random> because the standard distributions are implementation-defined:
///   uniform01  top 53 bits of one engine draw, scaled to [0, 1)
///   normal     Box-Muller cosine branch, two uniform draws per sample
/// Golden files therefore reproduce bit-for-bit on every conforming platform.
class StreamRng {
public:
    explicit StreamRng(std::uint64_t seed) : engine_(seed) {}

    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    bool bernoulli(double p) { return uniform01() < p; }

    double normal() {
        const double u1 = 1.0 - uniform01();  // (0, 1]
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    std::uint64_t next_u64() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

}  // namespace eadf
