#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace nesoc::rng {

// std::mt19937_64 output is pinned by the standard, but the distribution
// adaptors are not. These helpers keep seeded runs reproducible across
// standard library implementations.

inline double uniform01(std::mt19937_64& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& gen, double lo, double hi) {
    return lo + (hi - lo) * uniform01(gen);
}

/// Unbiased integer in [0, n) via rejection sampling.
inline std::uint64_t below(std::mt19937_64& gen, std::uint64_t n) {
    if (n == 0) return 0;
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = gen();
    } while (x >= limit);
    return x % n;
}

template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& gen) {
    for (std::size_t i = v.size(); i > 1; --i)
        std::swap(v[i - 1], v[below(gen, i)]);
}

} // namespace nesoc::rng
