#include "rfc/signal.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rfc/errors.hpp"
#include "rfc/sampling.hpp"

namespace rfc {

namespace {

bool same_value(const Vec& a, const Vec& b) { return a.size() == b.size() && a == b; }

bool on_grid(double t, double delta) {
    const double q = t / delta;
    return std::abs(q - std::round(q)) <= 1e-9 * std::max(1.0, std::abs(q));
}

}  // namespace

Signal::Signal(std::vector<double> switch_times, std::vector<Vec> values, Vec tail)
    : tail_(std::move(tail)) {
    if (switch_times.size() != values.size())
        throw std::invalid_argument("Signal: one value per switch interval required");
    for (std::size_t i = 0; i < switch_times.size(); ++i) {
        if (!(switch_times[i] > (i == 0 ? 0.0 : switch_times[i - 1])) || !std::isfinite(switch_times[i]))
            throw std::invalid_argument("Signal: switch times must be positive and strictly increasing");
        if (values[i].size() != tail_.size())
            throw std::invalid_argument("Signal: all values must share the input dimension");
    }
    // Merge runs of equal values so that equal signals compare equal.
    for (std::size_t i = 0; i < values.size(); ++i) {
        const Vec& next = (i + 1 < values.size()) ? values[i + 1] : tail_;
        if (same_value(values[i], next)) continue;
        switch_times_.push_back(switch_times[i]);
        values_.push_back(std::move(values[i]));
    }
}

Signal Signal::constant(const Vec& value) { return Signal({}, {}, value); }

Signal Signal::constant(double value) { return constant(Vec::Constant(1, value)); }

Vec Signal::at(double t) const {
    const auto it = std::upper_bound(switch_times_.begin(), switch_times_.end(), t);
    const auto i = static_cast<std::size_t>(it - switch_times_.begin());
    return i < values_.size() ? values_[i] : tail_;
}

std::vector<double> Signal::breakpoints(double t0, double t1) const {
    std::vector<double> out;
    for (double s : switch_times_)
        if (s > t0 && s < t1) out.push_back(s);
    return out;
}

bool operator==(const Signal& a, const Signal& b) {
    if (a.switch_times_ != b.switch_times_ || !same_value(a.tail_, b.tail_)) return false;
    for (std::size_t i = 0; i < a.values_.size(); ++i)
        if (!same_value(a.values_[i], b.values_[i])) return false;
    return true;
}

double value_norm(const Vec& v) { return v.norm(); }

double sup_norm(const Signal& u) {
    double s = value_norm(u.tail());
    for (const Vec& v : u.values()) s = std::max(s, value_norm(v));
    return s;
}

double lp_norm(const Signal& u, double p) {
    if (!(p >= 1.0)) throw DomainError("lp_norm: p must be >= 1");
    if (value_norm(u.tail()) != 0.0)
        throw UnsupportedSignalError("lp_norm: signal has a non-zero tail (no compact support)");
    double acc = 0.0;
    double start = 0.0;
    const auto times = u.switch_times();
    const auto values = u.values();
    for (std::size_t i = 0; i < times.size(); ++i) {
        acc += std::pow(value_norm(values[i]), p) * (times[i] - start);
        start = times[i];
    }
    return std::pow(acc, 1.0 / p);
}

Signal shift(const Signal& u, double tau) {
    if (tau < 0.0) throw DomainError("shift: tau must be nonnegative");
    std::vector<double> times;
    std::vector<Vec> values;
    const auto st = u.switch_times();
    const auto sv = u.values();
    for (std::size_t i = 0; i < st.size(); ++i) {
        if (st[i] <= tau) continue;
        times.push_back(st[i] - tau);
        values.push_back(sv[i]);
    }
    return Signal(std::move(times), std::move(values), u.tail());
}

Signal concat(const Signal& u1, const Signal& u2, double t) {
    if (!(t > 0.0)) throw DomainError("concat: t must be positive");
    std::vector<double> times;
    std::vector<Vec> values;
    const auto t1 = u1.switch_times();
    const auto v1 = u1.values();
    for (std::size_t i = 0; i < t1.size() && t1[i] < t; ++i) {
        times.push_back(t1[i]);
        values.push_back(v1[i]);
    }
    times.push_back(t);
    values.push_back(u1.at(std::nextafter(t, 0.0)));
    const auto t2 = u2.switch_times();
    const auto v2 = u2.values();
    for (std::size_t i = 0; i < t2.size(); ++i) {
        times.push_back(t2[i] + t);
        values.push_back(v2[i]);
    }
    return Signal(std::move(times), std::move(values), u2.tail());
}

DisturbanceFamily::DisturbanceFamily(double R, double delta, std::vector<Vec> lattice,
                                     std::vector<Signal> members, double horizon, std::uint64_t seed)
    : R_(R), delta_(delta), lattice_(std::move(lattice)), members_(std::move(members)),
      horizon_(horizon), seed_(seed) {
    if (!(R_ >= 0.0)) throw std::invalid_argument("DisturbanceFamily: R must be nonnegative");
    if (!(delta_ > 0.0)) throw std::invalid_argument("DisturbanceFamily: delta must be positive");
    if (members_.empty()) throw std::invalid_argument("DisturbanceFamily: no members");
    const std::size_t m = members_.front().dim();
    for (const Signal& u : members_) {
        if (u.dim() != m) throw std::invalid_argument("DisturbanceFamily: mixed input dimensions");
        if (!unbounded() && sup_norm(u) > R_ * (1.0 + 1e-12))
            throw std::invalid_argument("DisturbanceFamily: member exceeds the radius R");
    }
}

bool DisturbanceFamily::admits(const Signal& u) const {
    if (u.dim() != input_dim()) return false;
    auto in_lattice = [&](const Vec& v) {
        return std::any_of(lattice_.begin(), lattice_.end(),
                           [&](const Vec& l) { return (l - v).norm() <= 1e-12 * (1.0 + l.norm()); });
    };
    for (double t : u.switch_times())
        if (!on_grid(t, delta_)) return false;
    for (const Vec& v : u.values())
        if (!in_lattice(v)) return false;
    return in_lattice(u.tail());
}

std::vector<Vec> make_lattice(double R, std::size_t lattice_size, std::size_t input_dim) {
    if (!(R >= 0.0) || std::isinf(R))
        throw std::invalid_argument("make_lattice: R must be finite and nonnegative");
    if (lattice_size == 0 || input_dim == 0)
        throw std::invalid_argument("make_lattice: lattice_size and input_dim must be positive");
    std::vector<double> levels;
    if (lattice_size == 1 || R == 0.0) {
        levels.push_back(0.0);
    } else {
        for (std::size_t i = 0; i < lattice_size; ++i)
            levels.push_back(-R + 2.0 * R * static_cast<double>(i) / static_cast<double>(lattice_size - 1));
    }
    std::vector<Vec> lattice;
    std::vector<std::size_t> idx(input_dim, 0);
    while (true) {
        Vec v(static_cast<Eigen::Index>(input_dim));
        for (std::size_t d = 0; d < input_dim; ++d) v[static_cast<Eigen::Index>(d)] = levels[idx[d]];
        if (v.norm() <= R * (1.0 + 1e-12)) lattice.push_back(v);
        std::size_t d = 0;
        while (d < input_dim && ++idx[d] == levels.size()) idx[d++] = 0;
        if (d == input_dim) break;
    }
    return lattice;
}

DisturbanceFamily sample_family(const FamilySpec& spec) {
    if (std::isinf(spec.R))
        throw std::invalid_argument(
            "sample_family: an unbounded ball cannot be sampled; use finite radii");
    if (!(spec.delta > 0.0)) throw std::invalid_argument("sample_family: delta must be positive");
    if (spec.n_random < 1) throw std::invalid_argument("sample_family: N must be >= 1");
    auto lattice = make_lattice(spec.R, spec.lattice_size, spec.input_dim);

    std::vector<Signal> members;
    for (const Vec& v : lattice) members.push_back(Signal::constant(v));

    const auto cells = static_cast<std::size_t>(std::floor(spec.horizon / spec.delta + 1e-9));
    Rng rng(spec.seed);
    std::size_t accepted = 0;
    // A lattice of one value cannot produce non-constant signals.
    const std::size_t max_attempts = lattice.size() > 1 ? 1000 * spec.n_random : 0;
    for (std::size_t attempt = 0; attempt < max_attempts && accepted < spec.n_random; ++attempt) {
        std::vector<double> times;
        std::vector<Vec> values;
        for (std::size_t j = 0; j < cells; ++j) {
            times.push_back(static_cast<double>(j + 1) * spec.delta);
            values.push_back(lattice[pick_index(rng, lattice.size())]);
        }
        Signal u(std::move(times), std::move(values), lattice[pick_index(rng, lattice.size())]);
        if (std::find(members.begin(), members.end(), u) != members.end()) continue;
        members.push_back(std::move(u));
        ++accepted;
    }
    return DisturbanceFamily(spec.R, spec.delta, std::move(lattice), std::move(members), spec.horizon,
                             spec.seed);
}

ClosureReport closure_check(const DisturbanceFamily& family, NormKind kind, double p) {
    ClosureReport report;
    report.norm_kind = kind;
    report.p = p;
    report.R = family.R();

    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < family.size(); ++i) {
        if (kind == NormKind::Lp && value_norm(family.members()[i].tail()) != 0.0) continue;
        eligible.push_back(i);
    }
    const auto steps = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(family.horizon() / family.delta() + 1e-9)));
    const double limit = family.R() * (1.0 + 1e-12);

    for (std::size_t a : eligible) {
        for (std::size_t b : eligible) {
            const Signal& u1 = family.members()[a];
            const Signal& u2 = family.members()[b];
            for (std::size_t j = 1; j <= steps; ++j) {
                const double t = static_cast<double>(j) * family.delta();
                Signal w = concat(u1, u2, t);
                ++report.pairs_checked;
                const double norm = kind == NormKind::Sup ? sup_norm(w) : lp_norm(w, p);
                report.max_concat_norm = std::max(report.max_concat_norm, norm);
                const bool ok = norm <= limit && (kind == NormKind::Lp || family.admits(w));
                if (ok) continue;
                report.closed = false;
                if (!report.witness || norm > report.witness->norm)
                    report.witness = ClosureWitness{u1, u2, t, norm};
            }
        }
    }
    return report;
}

}  // namespace rfc
