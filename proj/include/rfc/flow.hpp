#pragma once

// Control systems generated by ODEs x' = f(x, u): catalog, numerical flow with
// blow-up detection, axiom residuals and flow-Lipschitz estimates.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rfc/kfun.hpp"
#include "rfc/signal.hpp"

namespace rfc {

using State = Eigen::VectorXd;

/// A sampled trajectory left every bounded set in finite time: evidence that
/// the system is not robustly forward complete on the sampled data.
class NonRfcWitness : public std::runtime_error {
public:
    NonRfcWitness(const std::string& what, State x, Signal u, double t_esc)
        : std::runtime_error(what), x_(std::move(x)), u_(std::move(u)), t_esc_(t_esc) {}
    const State& x() const noexcept { return x_; }
    const Signal& u() const noexcept { return u_; }
    double t_esc() const noexcept { return t_esc_; }

private:
    State x_;
    Signal u_;
    double t_esc_;
};

enum class FieldId { ScalarXu, ScalarRfc, Linear, Quadratic, DecayPlusInput };

std::string to_string(FieldId id);
FieldId field_id_from_string(const std::string& name);

/// Vector-field descriptor.
///
/// `lip_bound`, when present, maps a radius r to a bound on the one-sided
/// Lipschitz constant of f(., u) on the ball B_r, uniformly over the admissible
/// inputs. It is clipped at zero, so exp(L * tau) bounds the flow Lipschitz
/// constant over [0, tau].
struct SystemModel {
    FieldId field = FieldId::ScalarRfc;
    std::size_t n = 1;
    std::size_t m = 1;
    Eigen::MatrixXd A;  // linear only
    Eigen::MatrixXd B;  // linear only
    std::optional<MonotoneFn> lip_bound;

    State eval(const State& x, const Vec& u) const;
    /// f(0, u) = 0 for every u.
    bool preserves_origin() const;
    std::string name() const { return to_string(field); }

    /// x' = x u
    static SystemModel scalar_xu();
    /// x' = x / (1 + |u|)
    static SystemModel scalar_rfc();
    /// x' = A x + B u
    static SystemModel linear(Eigen::MatrixXd A, Eigen::MatrixXd B);
    /// x' = x^2 (input ignored)
    static SystemModel quadratic();
    /// x' = -x + u
    static SystemModel decay_plus_input();
};

/// Catalog bound for `lip_bound` given the input radius R.
MonotoneFn catalog_lip_bound(const SystemModel& model, double R);

enum class FlowStatus { Completed, Blowup };

struct EvolveOptions {
    double tol = 1e-9;
    double m_max = 1e9;
    double h_min = 1e-12;
    std::size_t max_steps = 5'000'000;
    /// Extra sample times reported in the trajectory, filled by dense output.
    std::vector<double> output_times;
    /// Also record every accepted integration node. When false only t = 0,
    /// the output times, the final time and a blow-up node are recorded.
    bool record_nodes = true;
};

/// Sampled solution. Samples are the accepted integration nodes merged with
/// the requested output times, in ascending order.
struct Trajectory {
    std::vector<double> times;
    std::vector<State> states;
    FlowStatus status = FlowStatus::Completed;
    double t_end = 0.0;     // requested horizon
    double t_esc = 0.0;     // blow-up time (status == Blowup)
    double m_exceeded = 0.0;
    double integrator_tol = 0.0;
    std::size_t steps = 0;
    std::size_t rejected = 0;

    bool blew_up() const noexcept { return status == FlowStatus::Blowup; }
    const State& final_state() const { return states.back(); }
    double max_norm() const;
};

/// Adaptive Dormand-Prince 5(4) integration over [0, T]. Input switch times
/// are mandatory breakpoints. Crossing ||x|| > m_max or the step-size floor
/// ends the run with status Blowup. Throws ModelError if the field is not
/// finite at an accepted state.
Trajectory evolve(const SystemModel& model, const State& x0, const Signal& u, double T,
                  const EvolveOptions& opts = {});

/// State at time t. Returns x0 for t = 0; throws MaximalIntervalError if the
/// solution blows up before t.
State flow_at(const SystemModel& model, const State& x0, const Signal& u, double t, double tol = 1e-9);

struct AxiomOptions {
    std::size_t n_cases = 100;
    std::uint64_t seed = 0;
    double tol = 1e-9;
    double state_radius = 1.0;
    double t_max = 1.0;
};

/// Residuals are measured relative to 1 + ||state||, matching the mixed
/// absolute/relative local error control of the integrator.
struct AxiomReport {
    double identity = 0.0;
    double causality = 0.0;
    double cocycle = 0.0;
    double continuity = 0.0;
    double axiom_tol = 0.0;
    std::size_t cases = 0;
    std::size_t skipped_blowup = 0;
    bool pass = false;
};

AxiomReport check_axioms(const SystemModel& model, const DisturbanceFamily& family,
                         const AxiomOptions& opts = {});

struct LipschitzOptions {
    std::size_t n_pairs = 32;
    std::uint64_t seed = 0;
    double tol = 1e-9;
    std::size_t t_samples = 64;
    /// Bound on ||phi(t, x, u)|| over B_r x [0, tau] used to evaluate lip_bound;
    /// the sampled maximum is used when absent.
    std::optional<double> r_env;
};

struct LipschitzEstimate {
    double empirical = 0.0;
    std::optional<double> certified;
    double r_env = 0.0;
    /// certified if available, otherwise empirical.
    double value() const { return certified.value_or(empirical); }
};

/// Estimates L(tau, r) with ||phi(t,x,u) - phi(t,y,u)|| <= L ||x - y|| for
/// x, y in B_r, t in [0, tau], u in the family. Throws NonRfcWitness if a
/// sampled trajectory blows up.
LipschitzEstimate lipschitz_estimate(const SystemModel& model, double tau, double r,
                                     const DisturbanceFamily& family, const LipschitzOptions& opts = {});

}  // namespace rfc
