#pragma once

#include <cstddef>
#include <random>

namespace robotseg {

// Hand-rolled draws so results depend only on the mt19937_64 stream, not on
// the standard library's distribution implementations.
inline double rng_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double rng_uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * rng_uniform(rng);
}

inline std::size_t rng_index(std::mt19937_64& rng, std::size_t n) {
    return static_cast<std::size_t>(rng() % n);
}

}  // namespace robotseg
