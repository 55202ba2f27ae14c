#pragma once

// Independent reference computations used by the unit and acceptance tests.
// Nothing here calls into the code paths being checked beyond plain function
// evaluation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "rfc/kfun.hpp"

namespace oracle {

inline std::vector<double> uniform_grid(double a, double b, std::size_t n) {
    std::vector<double> g(n + 1);
    for (std::size_t i = 0; i <= n; ++i) g[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n);
    return g;
}

/// rho(s) = min over sigma in [0, s] of alpha(sigma) + s - sigma, by brute
/// force over a candidate set: a uniform grid on [0, max probe], all knots of
/// alpha in range and every probe point. For a piecewise-linear alpha the
/// minimum over [0, s] is attained at a knot or at s, so the candidates
/// contain the exact minimiser.
inline std::vector<double> infimal_convolution(const rfc::MonotoneFn& alpha, const std::vector<double>& probes,
                                               std::size_t grid_points = 10000) {
    const double top = *std::max_element(probes.begin(), probes.end());
    std::vector<double> cand = uniform_grid(0.0, top, grid_points);
    for (double k : alpha.knots())
        if (k <= top) cand.push_back(k);
    cand.insert(cand.end(), probes.begin(), probes.end());
    std::sort(cand.begin(), cand.end());
    std::vector<double> g(cand.size());
    for (std::size_t i = 0; i < cand.size(); ++i) g[i] = alpha(cand[i]) - cand[i];

    std::vector<double> out;
    out.reserve(probes.size());
    for (double s : probes) {
        double best = INFINITY;
        for (std::size_t i = 0; i < cand.size() && cand[i] <= s; ++i) best = std::min(best, g[i]);
        out.push_back(s + best);
    }
    return out;
}

/// Smallest root of e^{-t}(A + t) = level on the decreasing branch, by plain
/// bisection on [max(0, 1 - A), hi].
inline double horizon_root(double A, double level) {
    auto g = [A](double t) { return std::exp(-t) * (A + t); };
    double lo = std::max(0.0, 1.0 - A);
    if (g(lo) <= level) return 0.0;
    double hi = lo + 1.0;
    while (g(hi) > level) hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (g(mid) > level ? lo : hi) = mid;
    }
    return hi;
}

}  // namespace oracle
