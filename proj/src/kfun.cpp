#include "rfc/kfun.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rfc/errors.hpp"

namespace rfc {

std::vector<double> log_knots(const KnotGrid& grid) {
    if (grid.count < 3 || !(grid.s_min > 0.0) || !(grid.s_max > grid.s_min))
        throw std::invalid_argument("log_knots: need count >= 3 and 0 < s_min < s_max");
    std::vector<double> knots;
    knots.reserve(grid.count);
    knots.push_back(0.0);
    const std::size_t m = grid.count - 1;
    const double ratio = std::log(grid.s_max / grid.s_min) / static_cast<double>(m - 1);
    for (std::size_t i = 0; i < m; ++i)
        knots.push_back(grid.s_min * std::exp(ratio * static_cast<double>(i)));
    knots.back() = grid.s_max;
    return knots;
}

MonotoneFn::MonotoneFn(std::vector<double> knots, std::vector<double> values, double tail_slope,
                       double s_max)
    : knots_(std::move(knots)), values_(std::move(values)), tail_slope_(tail_slope) {
    if (knots_.empty() || knots_.size() != values_.size())
        throw ContractError("MonotoneFn: knots and values must be non-empty and equally long");
    if (knots_.front() != 0.0) throw ContractError("MonotoneFn: first knot must be 0");
    if (!(tail_slope_ > 0.0) || !std::isfinite(tail_slope_))
        throw ContractError("MonotoneFn: tail_slope must be positive and finite");
    double prev_input = values_.empty() ? 0.0 : values_.front();
    for (std::size_t i = 0; i < knots_.size(); ++i) {
        if (!std::isfinite(knots_[i]) || !std::isfinite(values_[i]))
            throw ContractError("MonotoneFn: non-finite knot or value");
        if (i == 0) continue;
        if (!(knots_[i] > knots_[i - 1]))
            throw ContractError("MonotoneFn: knots must be strictly increasing");
        if (values_[i] < prev_input)
            throw ContractError("MonotoneFn: values decrease at knot " + std::to_string(i));
        prev_input = values_[i];
        const double lifted = values_[i - 1] + kSlopeFloor * (knots_[i] - knots_[i - 1]);
        if (values_[i] < lifted) values_[i] = lifted;
        // Rounding in the lift can leave the segment flat in floating point.
        if (!(values_[i] > values_[i - 1])) values_[i] = std::nextafter(values_[i - 1], INFINITY);
    }
    tail_slope_ = std::max(tail_slope_, kSlopeFloor);
    s_max_ = s_max > 0.0 ? s_max : knots_.back();
}

MonotoneFn MonotoneFn::identity(double s_max) { return linear(1.0, s_max); }

MonotoneFn MonotoneFn::linear(double slope, double s_max) {
    if (!(slope > 0.0)) throw ContractError("MonotoneFn::linear: slope must be positive");
    return MonotoneFn({0.0, s_max}, {0.0, slope * s_max}, slope, s_max);
}

double MonotoneFn::eval(double s) const {
    if (s < 0.0 || std::isnan(s)) throw DomainError("MonotoneFn::eval: negative argument");
    if (s >= knots_.back()) return values_.back() + tail_slope_ * (s - knots_.back());
    const auto it = std::upper_bound(knots_.begin(), knots_.end(), s);
    const auto i = static_cast<std::size_t>(it - knots_.begin());  // knots_[i-1] <= s < knots_[i]
    const double w = (s - knots_[i - 1]) / (knots_[i] - knots_[i - 1]);
    return values_[i - 1] + w * (values_[i] - values_[i - 1]);
}

double MonotoneFn::invert(double y) const {
    if (std::isnan(y) || y < values_.front())
        throw BelowRangeError("MonotoneFn::invert: value below f(0)");
    if (y >= values_.back()) return knots_.back() + (y - values_.back()) / tail_slope_;
    const auto it = std::upper_bound(values_.begin(), values_.end(), y);
    const auto i = static_cast<std::size_t>(it - values_.begin());
    const double w = (y - values_[i - 1]) / (values_[i] - values_[i - 1]);
    return knots_[i - 1] + w * (knots_[i] - knots_[i - 1]);
}

MonotoneFn MonotoneFn::inverse() const {
    if (!is_kinf()) throw ContractError("MonotoneFn::inverse: requires f(0) = 0");
    return MonotoneFn(values_, knots_, 1.0 / tail_slope_, eval(s_max_));
}

double MonotoneFn::lipschitz_constant() const {
    double lip = tail_slope_;
    for (std::size_t i = 1; i < knots_.size(); ++i)
        lip = std::max(lip, (values_[i] - values_[i - 1]) / (knots_[i] - knots_[i - 1]));
    return lip;
}

double gk_eval(int k, double r) {
    if (k < 1) throw DomainError("gk_eval: k must be a positive integer");
    return std::max(r - 1.0 / static_cast<double>(k), 0.0);
}

MonotoneFn lipschitz_lower_bound(const MonotoneFn& alpha) {
    if (!alpha.is_kinf()) throw ContractError("lipschitz_lower_bound: alpha must be K-infinity");
    const auto s = alpha.knots();
    const auto v = alpha.values();

    // rho(s) = s + m(s) with m the running minimum of g = alpha - id. Where m
    // is flat rho has slope 1; where m follows g, rho coincides with alpha.
    // m is kept as an anchor knot (sa, va) with m = va - sa, and every value
    // is formed from differences to the anchor: s and alpha(s) can both be
    // huge while rho stays moderate.
    std::vector<double> knots{0.0};
    std::vector<double> values{0.0};
    auto push = [&](double knot, double value) {
        if (knot <= knots.back()) {
            values.back() = std::min(values.back(), value);
            return;
        }
        knots.push_back(knot);
        values.push_back(std::max(value, values.back()));
    };

    double sa = s[0], va = v[0];
    for (std::size_t i = 1; i < s.size(); ++i) {
        const double ds = s[i] - s[i - 1];
        const double dv = v[i] - v[i - 1];
        const double ea = (v[i - 1] - va) - (s[i - 1] - sa);  // g(s[i-1]) - m >= 0
        if (ea + dv - ds >= 0.0) {
            push(s[i], va + (s[i] - sa));
            continue;
        }
        if (ea > 0.0) {
            const double c = s[i - 1] + ea / (ds - dv) * ds;
            push(c, va + (c - sa));
        }
        sa = s[i];
        va = v[i];
        push(s[i], v[i]);
    }

    double tail = 1.0;
    if (alpha.tail_slope() < 1.0) {
        const double e_last = (v.back() - va) - (s.back() - sa);
        if (e_last > 0.0) {
            const double c = s.back() + e_last / (1.0 - alpha.tail_slope());
            push(c, va + (c - sa));
        }
        tail = alpha.tail_slope();
    }
    return MonotoneFn(std::move(knots), std::move(values), tail, alpha.s_max());
}

bool triangle_split_check(const MonotoneFn& alpha, double a, double b, double c) {
    return alpha(a + b + c) <= alpha(3.0 * a) + alpha(3.0 * b) + alpha(3.0 * c);
}

}  // namespace rfc
