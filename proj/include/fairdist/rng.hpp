#ifndef FAIRDIST_RNG_HPP
#define FAIRDIST_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

// Pinned samplers on top of mt19937_64. std::normal_distribution and friends
// are implementation-defined, so everything that must be bit-reproducible
// across toolchains is hand-rolled here.

namespace fairdist {

using Rng = std::mt19937_64;

// splitmix64, used to derive independent sub-stream seeds from a user seed.
inline std::uint64_t split_seed(std::uint64_t seed, std::uint64_t tag) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Uniform on (0, 1]: 53-bit mantissa, never exactly zero (safe under log).
inline double uniform01(Rng& rng) {
    return static_cast<double>((rng() >> 11) + 1) * 0x1.0p-53;
}

// Uniform index in [0, n) via 128-bit multiply (no modulo bias to speak of).
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    return static_cast<std::size_t>((static_cast<unsigned __int128>(rng()) * n) >> 64);
}

// Box-Muller without the cached spare, so draw order is trivially reproducible.
inline double standard_normal(Rng& rng) {
    const double u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

// Bounded isotropic alternative to the normal: a two-point scale mixture of
// Rademacher signs with unit variance.
inline double rademacher_mixture(Rng& rng) {
    const double scale = (uniform01(rng) <= 0.1) ? 3.0 : 1.0;
    const double sign = (rng() & 1ULL) ? 1.0 : -1.0;
    return sign * scale / std::sqrt(1.8);
}

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = uniform_index(rng, i);
        std::swap(v[i - 1], v[j]);
    }
}

} // namespace fairdist

#endif
