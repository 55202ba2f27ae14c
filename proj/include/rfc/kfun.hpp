#pragma once

// Comparison-function algebra: strictly increasing piecewise-linear functions
// on [0, inf), the clipping family G_k and the 1-Lipschitz K-infinity minorant.

#include <cstddef>
#include <span>
#include <vector>

namespace rfc {

/// Log-spaced abscissa layout used when tabulating a function: knot 0 followed
/// by `count - 1` geometric knots from `s_min` to `s_max`.
struct KnotGrid {
    double s_max = 1e3;
    std::size_t count = 512;
    double s_min = 1e-6;
};

std::vector<double> log_knots(const KnotGrid& grid);

/// Strictly increasing, continuous, piecewise-linear function on [0, inf).
///
/// Between knots the function interpolates linearly; past the last knot it
/// continues with slope `tail_slope`. Segments flatter than `kSlopeFloor` are
/// lifted on construction so every segment is invertible.
class MonotoneFn {
public:
    static constexpr double kSlopeFloor = 1e-12;

    /// Throws ContractError unless knots start at 0 and strictly increase,
    /// values are finite and nondecreasing, and tail_slope > 0.
    MonotoneFn(std::vector<double> knots, std::vector<double> values, double tail_slope,
               double s_max = 0.0);

    static MonotoneFn identity(double s_max = 1e3);
    static MonotoneFn linear(double slope, double s_max = 1e3);

    /// Tabulates `f` on `grid`; the tail continues the last segment's slope.
    template <class F>
    static MonotoneFn sample(F&& f, const KnotGrid& grid = {}) {
        auto knots = log_knots(grid);
        std::vector<double> values;
        values.reserve(knots.size());
        for (double s : knots) values.push_back(f(s));
        const std::size_t n = knots.size();
        double tail = (values[n - 1] - values[n - 2]) / (knots[n - 1] - knots[n - 2]);
        if (!(tail > kSlopeFloor)) tail = kSlopeFloor;
        return MonotoneFn(std::move(knots), std::move(values), tail, grid.s_max);
    }

    double operator()(double s) const { return eval(s); }
    /// Throws DomainError for s < 0.
    double eval(double s) const;
    /// Solves f(s) = y. Throws BelowRangeError for y < f(0).
    double invert(double y) const;
    /// Exact piecewise-linear inverse. Requires f(0) = 0.
    MonotoneFn inverse() const;

    bool is_kinf() const noexcept { return values_.front() == 0.0; }
    double value_at_zero() const noexcept { return values_.front(); }
    std::span<const double> knots() const noexcept { return knots_; }
    std::span<const double> values() const noexcept { return values_; }
    double tail_slope() const noexcept { return tail_slope_; }
    double s_max() const noexcept { return s_max_; }

    /// Largest ratio |f(s1)-f(s2)|/|s1-s2| (the maximum segment slope).
    double lipschitz_constant() const;

private:
    std::vector<double> knots_;
    std::vector<double> values_;
    double tail_slope_;
    double s_max_;
};

/// G_k(r) = max{r - 1/k, 0}.
double gk_eval(int k, double r);

struct GkFn {
    int k = 1;
    double operator()(double r) const { return gk_eval(k, r); }
};

/// Largest 1-Lipschitz minorant of a K-infinity function,
/// rho(s) = inf_{sigma in [0,s]} (alpha(sigma) + s - sigma).
/// Computed exactly for the piecewise-linear input.
MonotoneFn lipschitz_lower_bound(const MonotoneFn& alpha);

/// alpha(a+b+c) <= alpha(3a) + alpha(3b) + alpha(3c).
bool triangle_split_check(const MonotoneFn& alpha, double a, double b, double c);

}  // namespace rfc
