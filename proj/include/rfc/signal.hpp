#pragma once

// Piecewise-constant input signals and finite disturbance families.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace rfc {

using Vec = Eigen::VectorXd;

/// Right-continuous piecewise-constant signal on [0, inf).
///
/// `values[i]` is held on [t_{i-1}, t_i) with t_{-1} = 0, where t_i are the
/// switch times; `tail` is held on [t_last, inf). The representation is
/// canonical: adjacent equal segments are merged on construction.
class Signal {
public:
    Signal(std::vector<double> switch_times, std::vector<Vec> values, Vec tail);

    static Signal constant(const Vec& value);
    static Signal constant(double value);

    Vec at(double t) const;
    std::size_t dim() const noexcept { return static_cast<std::size_t>(tail_.size()); }

    std::span<const double> switch_times() const noexcept { return switch_times_; }
    std::span<const Vec> values() const noexcept { return values_; }
    const Vec& tail() const noexcept { return tail_; }
    bool is_constant() const noexcept { return switch_times_.empty(); }

    /// Switch times in the open interval (t0, t1).
    std::vector<double> breakpoints(double t0, double t1) const;

    friend bool operator==(const Signal& a, const Signal& b);

private:
    std::vector<double> switch_times_;
    std::vector<Vec> values_;
    Vec tail_;
};

/// Pointwise norm on the input-value space (Euclidean).
double value_norm(const Vec& v);

double sup_norm(const Signal& u);
/// Throws UnsupportedSignalError unless the tail is zero.
double lp_norm(const Signal& u, double p);

/// s -> u(s + tau).
Signal shift(const Signal& u, double tau);
/// u1 on [0, t], u2(. - t) afterwards (the switch at t itself is right-continuous).
Signal concat(const Signal& u1, const Signal& u2, double t);

enum class NormKind { Sup, Lp };

struct FamilySpec {
    double R = 1.0;
    double delta = 0.5;
    std::size_t lattice_size = 3;
    std::size_t n_random = 10;
    double horizon = 2.0;
    std::uint64_t seed = 0;
    std::size_t input_dim = 1;
};

/// Finite set of lattice-valued signals switching on the grid delta*N.
///
/// The ambient set of all such signals with values in `lattice` (norm <= R) is
/// closed under grid shifts and grid concatenations; `admits` tests membership
/// in that ambient set.
class DisturbanceFamily {
public:
    DisturbanceFamily(double R, double delta, std::vector<Vec> lattice, std::vector<Signal> members,
                      double horizon, std::uint64_t seed);

    double R() const noexcept { return R_; }
    bool unbounded() const noexcept { return R_ == std::numeric_limits<double>::infinity(); }
    double delta() const noexcept { return delta_; }
    double horizon() const noexcept { return horizon_; }
    std::uint64_t seed() const noexcept { return seed_; }
    std::span<const Vec> lattice() const noexcept { return lattice_; }
    std::span<const Signal> members() const noexcept { return members_; }
    std::size_t size() const noexcept { return members_.size(); }
    std::size_t input_dim() const noexcept { return members_.front().dim(); }

    /// Switches on the delta grid, values in the lattice.
    bool admits(const Signal& u) const;

private:
    double R_;
    double delta_;
    std::vector<Vec> lattice_;
    std::vector<Signal> members_;
    double horizon_;
    std::uint64_t seed_;
};

/// Lattice per axis: `lattice_size` evenly spaced levels on [-R, R]; vectors
/// of norm > R are dropped.
std::vector<Vec> make_lattice(double R, std::size_t lattice_size, std::size_t input_dim);

/// Constant signals at every lattice value plus `n_random` distinct random grid
/// signals (switches at multiples of delta up to the horizon). Deterministic in
/// `seed`; the first n members for n_random = N are a prefix of those for 2N.
DisturbanceFamily sample_family(const FamilySpec& spec);

struct ClosureWitness {
    Signal u1;
    Signal u2;
    double t;
    double norm;
};

struct ClosureReport {
    bool closed = true;
    NormKind norm_kind = NormKind::Sup;
    double p = 1.0;
    double R = 0.0;
    double max_concat_norm = 0.0;
    std::size_t pairs_checked = 0;
    std::optional<ClosureWitness> witness;
};

/// Checks that every grid concatenation of two members stays within radius R
/// in the chosen norm (and on the grid, for the sup norm). For L^p the largest
/// violating concatenation is reported; members without compact support are
/// not elements of L^p and are skipped.
ClosureReport closure_check(const DisturbanceFamily& family, NormKind kind, double p = 1.0);

}  // namespace rfc
