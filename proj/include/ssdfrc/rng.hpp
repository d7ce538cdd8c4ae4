// SPDX-License-Identifier: Apache-2.0
//
// Deterministic seed derivation. Every stochastic stream is identified by a
// path of integers below the master seed:
//
//   child = master
//   for tag in path: child = splitmix64(child ^ splitmix64(tag + 0x9E3779B97F4A7C15))
//
// so that (master, path) always selects the same stream regardless of the
// order or thread in which streams are consumed.

#pragma once

#include <complex>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace ssdfrc {

enum class Stream : std::uint64_t {
    Bits = 1,
    RadarNoise = 2,
    CommChannel = 3,
    CommNoise = 4,
    Targets = 5,
    TargetCoeffs = 6,
    Trial = 7,
};

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
    std::uint64_t s = master;
    for (auto tag : path) s = splitmix64(s ^ splitmix64(tag + 0x9E3779B97F4A7C15ULL));
    return s;
}

inline std::uint64_t derive_seed(std::uint64_t master, Stream stream, std::initializer_list<std::uint64_t> path = {}) {
    std::uint64_t s = derive_seed(master, {static_cast<std::uint64_t>(stream)});
    for (auto tag : path) s = derive_seed(s, {tag});
    return s;
}

using Rng = std::mt19937_64;

/// Circular complex Gaussian with E|z|^2 = variance.
inline std::complex<double> complex_gaussian(Rng& rng, double variance) {
    std::normal_distribution<double> n(0.0, std::sqrt(variance / 2.0));
    const double re = n(rng);
    const double im = n(rng);
    return {re, im};
}

/// Complex coefficient with the given mean and total variance E|z - mean|^2,
/// split evenly between real and imaginary parts.
inline std::complex<double> complex_coefficient(Rng& rng, std::complex<double> mean, double variance) {
    return mean + complex_gaussian(rng, variance);
}

inline std::vector<std::uint8_t> random_bits(Rng& rng, std::size_t count) {
    std::vector<std::uint8_t> bits(count);
    std::uniform_int_distribution<int> coin(0, 1);
    for (auto& b : bits) b = static_cast<std::uint8_t>(coin(rng));
    return bits;
}

}  // namespace ssdfrc
