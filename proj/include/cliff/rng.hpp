#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace cliff::rng {

/// Uniform draw in [0, 1). Hand-rolled from the raw 64-bit stream so that
/// datasets and initializations are bit-identical across standard libraries
/// (std::uniform_real_distribution is implementation-defined).
inline double uniform_unit(std::mt19937_64& g) {
    return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& g, double lo, double hi) {
    return lo + (hi - lo) * uniform_unit(g);
}

/// Standard normal via Box-Muller on the deterministic uniform stream.
inline double normal(std::mt19937_64& g) {
    double u1 = uniform_unit(g);
    while (u1 <= 0.0) u1 = uniform_unit(g);
    const double u2 = uniform_unit(g);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

/// Uniform integer in [0, n). Modulo bias is ~n/2^64, irrelevant here.
inline std::size_t index(std::mt19937_64& g, std::size_t n) {
    return static_cast<std::size_t>(g() % n);
}

}  // namespace cliff::rng
