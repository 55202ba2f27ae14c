#pragma once

// Portable seeded sampling helpers. std::mt19937_64 has a fully specified
// output sequence; the distributions below are written out so that results
// do not depend on the standard library implementation.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace rfc {

using Rng = std::mt19937_64;

inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Rng& rng, double a, double b) { return a + (b - a) * uniform01(rng); }

inline std::size_t pick_index(Rng& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

inline double standard_normal(Rng& rng) {
    double u1 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

inline Eigen::VectorXd random_unit(Rng& rng, std::size_t n) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    do {
        for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = standard_normal(rng);
    } while (v.norm() == 0.0);
    return v / v.norm();
}

/// Uniform in the closed ball of radius r.
inline Eigen::VectorXd random_in_ball(Rng& rng, std::size_t n, double r) {
    const Eigen::VectorXd d = random_unit(rng, n);
    return d * (r * std::pow(uniform01(rng), 1.0 / static_cast<double>(n)));
}

/// Derives an independent stream seed for sub-task `index`.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace rfc
