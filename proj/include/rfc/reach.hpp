#pragma once

// Reachability envelopes mu(r, t) estimated by adversarial sampling, their
// reduction to the xi(|x|) + xi(t) + c form, RFC bound checks and divergence
// probes.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "rfc/flow.hpp"
#include "rfc/kfun.hpp"
#include "rfc/signal.hpp"

namespace rfc {

struct FamilyRef {
    double R = 0.0;
    double delta = 0.0;
    std::size_t size = 0;
    std::uint64_t seed = 0;
};

/// Tabulated bound mu(r, t) on ||phi(t, x, u)|| over ||x|| <= r, u in the
/// family. Rows follow r_grid, columns follow t_grid.
struct Envelope {
    std::vector<double> r_grid;
    std::vector<double> t_grid;
    Eigen::MatrixXd values;
    std::size_t n_sphere = 0;
    FamilyRef family_ref;
    /// Signals tried in addition to the family members (hill-climb refinement).
    std::size_t refined_signals = 0;

    /// Bilinear interpolation. Throws DomainError outside the grid box.
    double eval(double r, double t) const;
    /// Nondecreasing along both axes.
    bool is_monotone() const;
};

struct EnvelopeOptions {
    /// Random directions per radius. One-dimensional states always use +-r.
    std::size_t n_sphere = 8;
    std::uint64_t seed = 0;
    double tol = 1e-9;
    unsigned jobs = 1;
    /// Coordinate hill-climbing over lattice values for the best signals.
    bool refine = false;
    std::size_t refine_top = 5;
    std::size_t refine_sweeps = 3;
    /// Extra initial states, used at every radius they fit into.
    std::vector<State> extra_states;
};

/// Throws NonRfcWitness if a sampled trajectory blows up before t_grid.back().
Envelope envelope_estimate(const SystemModel& model, const DisturbanceFamily& family,
                           const std::vector<double>& r_grid, const std::vector<double>& t_grid,
                           const EnvelopeOptions& opts = {});

/// mu(|x|, t) <= xi(|x|) + xi(t) + c for |x| <= r_valid and t <= t_valid.
struct XiForm {
    MonotoneFn xi;
    double c = 0.0;
    /// zeta at the smallest positive radius; c = 2 * zeta0.
    double zeta0 = 0.0;
    std::optional<MonotoneFn> zeta;
    double r_valid = INFINITY;
    double t_valid = INFINITY;

    double bound(double r, double t) const { return xi(r) + xi(t) + c; }
};

/// zeta(s) = mu(s, s) + s with arguments clamped to the table, xi = zeta - zeta0,
/// c = 2 zeta0. Throws ContractError for a non-monotone envelope.
XiForm mu_to_xi(const Envelope& env);

struct RfcBoundOptions {
    std::size_t n_cases = 1000;
    std::uint64_t seed = 0;
    double state_radius = 1.0;
    double t_max = 1.0;
    double tol = 1e-9;
    double tol_pad = 1e-6;
    unsigned jobs = 1;
};

struct RfcBoundReport {
    double max_violation = -INFINITY;
    /// tol_pad plus the integrator pad 50 tol (1 + max ||phi||).
    double pad = 0.0;
    double integrator_pad = 0.0;
    std::size_t cases = 0;
    bool pass = false;
    State worst_x;
    double worst_t = 0.0;
    std::size_t worst_member = 0;
};

/// Samples (x, u) and checks ||phi(t, x, u)|| <= xi(|x|) + xi(t) + c at every
/// integration node up to t_max. Throws NonRfcWitness on blow-up.
RfcBoundReport rfc_bound_check(const SystemModel& model, const DisturbanceFamily& family, const XiForm& xi,
                               const RfcBoundOptions& opts = {});

struct DivergenceOptions {
    double delta = 0.5;
    std::size_t lattice_size = 3;
    std::size_t n_random = 10;
    double horizon = 2.0;
    std::uint64_t seed = 0;
    std::size_t n_sphere = 8;
    double tol = 1e-9;
    unsigned jobs = 1;
};

struct DivergencePoint {
    double R = 0.0;
    double value = 0.0;
    bool blew_up = false;
    double t_esc = 0.0;
};

/// Envelope value at (||x0||, t_probe) for a radius-R family, per R. Blow-up
/// is recorded as an infinite value.
std::vector<DivergencePoint> divergence_probe(const SystemModel& model, const std::vector<double>& R_schedule,
                                              double t_probe, const State& x0, const DivergenceOptions& opts = {});

}  // namespace rfc
