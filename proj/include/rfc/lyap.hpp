#pragma once

// Converse Lyapunov construction W = sum_k 2^-k / (1 + M(k,k)) V_k built from an
// RFC bound, and the direct checks: Dini-derivative dissipation, the comparison
// principle, the RFC bound it implies and the BRS certificate test.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rfc/flow.hpp"
#include "rfc/kfun.hpp"
#include "rfc/reach.hpp"
#include "rfc/signal.hpp"

namespace rfc {

/// Smallest t such that e^{-s}(R + s + xi^{-1}(c)) <= 1/k for every s >= t.
double horizon(double R, int k, const XiForm& xi);

struct LyapOptions {
    /// Truncation index of the series; 0 selects
    /// max(20, ceil(log2((R_work + C_upper) / tail_tol))).
    int K = 0;
    /// Radius of the working ball.
    double R_work = 1.0;
    double tail_tol = 1e-6;
    /// The t lattice step is T(ceil(R_work), K) / t_points.
    std::size_t t_points = 512;
    double tol = 1e-10;
    std::size_t lip_pairs = 8;
    std::uint64_t seed = 0;
    unsigned jobs = 1;
};

struct LyapConstruction {
    MonotoneFn rho;
    XiForm xi_form;
    DisturbanceFamily family;
    int K = 0;
    std::size_t R_max = 0;
    /// Rows R = 0..R_max, columns k = 1..K.
    Eigen::MatrixXd T_table;
    Eigen::MatrixXd M_table;
    std::size_t t_points = 512;
    double t_step = 0.0;
    double tol = 1e-10;
    double R_work = 1.0;
    /// xi^{-1}(c) + 1/e.
    double C_upper = 0.0;
    /// sum_k 2^-k / (k (1 + M(k,k))).
    double C2 = 0.0;
    /// The xi bound covers |x| <= R_work and t <= T(ceil(R_work), K).
    bool xi_range_ok = false;

    double T(std::size_t R, int k) const;
    double M(std::size_t R, int k) const;
    /// 2^-k / (1 + M(k, k)).
    double weight(int k) const;
};

LyapConstruction build_construction(const SystemModel& model, const DisturbanceFamily& family, const XiForm& xi,
                                    const LyapOptions& opts = {});

/// V_1..V_K at one state, sharing the simulations across k.
struct VkProfile {
    std::vector<double> V;
    /// Bound on how much the t-grid maximum can miss the sup over [0, T].
    double time_pad = 0.0;
    std::size_t R_index = 0;
};

/// Sup over `members` (the construction family when empty) and the t grid.
/// Throws NonRfcWitness on blow-up.
VkProfile vk_all(const LyapConstruction& c, const SystemModel& model, const State& x,
                 std::span<const Signal> members = {}, int K = 0);

double vk_eval(const LyapConstruction& c, const SystemModel& model, int k, const State& x);

struct WValue {
    double value = 0.0;
    /// 2^-K (||x|| + C_upper).
    double tail = 0.0;
    double time_pad = 0.0;
};

/// Series truncated at K (the construction's K when 0).
WValue w_eval(const LyapConstruction& c, const SystemModel& model, const State& x, int K = 0);
double psi1_eval(const LyapConstruction& c, double r, int K = 0);

struct GrowthRecord {
    int k = 0;
    double h = 0.0;
    double lhs = 0.0;  // V_k(phi(h, x, v))
    double rhs = 0.0;  // e^h V_k(x) + (e^h - 1)/k + family_gap
    double family_gap = 0.0;
    double pad = 0.0;
    double margin = 0.0;  // lhs - rhs
    bool pass = false;
};

/// Growth estimate along v for the requested k. family_gap is
/// e^h max(0, V_k over F and {v concatenated at h with u : u in F} minus V_k over F).
std::vector<GrowthRecord> growth_check(const LyapConstruction& c, const SystemModel& model, const State& x,
                                       const Signal& v, double h, const std::vector<int>& ks);

using Evaluator = std::function<double(const State&)>;

/// 1e-2, 5e-3, 2e-3, ..., 1e-5.
std::vector<double> default_h_seq();

struct DiniEstimate {
    double value = 0.0;
    std::vector<double> h;
    std::vector<double> quotients;
    /// Successive quotient differences do not grow towards small h.
    bool converging = true;
};

/// Forward-difference surrogate of the upper right Dini derivative of V along
/// u at x: the larger of the two finest quotients. h_seq must be decreasing.
/// Throws MaximalIntervalError if the flow blows up before max h.
DiniEstimate dini_estimate(const SystemModel& model, const Evaluator& V, const State& x, const Signal& u,
                           const std::vector<double>& h_seq = default_h_seq(), double tol = 1e-10);

/// max(1e-4, 10 h_min) (1 + V).
double dini_tolerance(const std::vector<double>& h_seq, double V);

struct DissipationRecord {
    State x;
    std::size_t member = 0;
    double dini = 0.0;
    double V = 0.0;
    double bound = 0.0;  // a V + M
    double margin = 0.0;  // dini - bound
    double tol = 0.0;
    bool converging = true;
};

struct DissipationReport {
    std::vector<DissipationRecord> records;
    double max_violation = -INFINITY;  // largest margin
    double max_excess = -INFINITY;     // largest margin - tol
    bool pass = false;
    std::vector<double> h_seq;
    std::size_t non_converging = 0;
};

struct DissipationOptions {
    std::size_t n_states = 500;
    std::uint64_t seed = 0;
    double state_radius = 1.0;
    std::vector<double> h_seq = default_h_seq();
    double tol = 1e-10;
    unsigned jobs = 1;
};

/// Checks Dini(V, x, u) <= a V(x) + M at sampled (x, u).
DissipationReport dissipation_check(const SystemModel& model, const Evaluator& V, const DisturbanceFamily& family,
                                    double a, double M, const DissipationOptions& opts = {});

struct SandwichRecord {
    State x;
    double psi1 = 0.0;
    double W = 0.0;
    double upper = 0.0;  // |x| + C_upper + pad
};

struct SandwichReport {
    std::vector<SandwichRecord> records;
    double max_lower_violation = -INFINITY;  // psi1(|x|) - W(x)
    double max_upper_violation = -INFINITY;  // W(x) - (|x| + C_upper + pad)
    double pad = 1e-6;
    std::size_t states = 0;
    bool pass = false;
};

SandwichReport sandwich_check(const LyapConstruction& c, const SystemModel& model, std::size_t n_states,
                              double radius, std::uint64_t seed, double pad = 1e-6, unsigned jobs = 1);

/// y0 e^{at} + (M/a)(e^{at} - 1). Throws DomainError for a <= 0 or M < 0.
double comparison_bound(double y0, double a, double M, double t);

/// psi1^{-1}(e^{at}(psi2(r) + C) + (M/a)(e^{at} - 1)).
double rfc_from_lyapunov(const MonotoneFn& psi1, const MonotoneFn& psi2, double C, double a, double M, double r,
                         double t);

struct BrsCertificate {
    std::string v_name = "norm";
    Evaluator V;
    MonotoneFn psi1;
    MonotoneFn psi2;
    double C = 0.0;
    double a = 1.0;
    MonotoneFn gamma;
};

struct BrsOptions {
    std::size_t n_cases = 500;
    double tau = 5.0;
    std::uint64_t seed = 0;
    double state_radius = 1.0;
    double tol = 1e-10;
    double tol_pad = 1e-6;
    std::vector<double> h_seq = default_h_seq();
    unsigned jobs = 1;
    /// Checked before the random cases.
    std::vector<std::pair<State, Signal>> probes;
};

enum class BrsViolationKind { Gate, Trajectory, Blowup };
std::string to_string(BrsViolationKind kind);

struct BrsViolation {
    BrsViolationKind kind = BrsViolationKind::Gate;
    State x;
    Signal u;
    double t = 0.0;
    double value = 0.0;  // Dini estimate, trajectory norm or escape time
    double bound = 0.0;
};

struct BrsRecord {
    State x;
    double u_norm = 0.0;
    bool gate_active = false;
    double dini = 0.0;
    double gate_bound = 0.0;
    double gate_tol = 0.0;
    double gate_margin = -INFINITY;
    double trajectory_bound = 0.0;
    double max_norm = 0.0;
    double trajectory_margin = -INFINITY;
    bool blew_up = false;
    double t_esc = 0.0;
};

struct BrsReport {
    std::vector<BrsRecord> records;
    std::size_t cases = 0;
    std::size_t gate_active = 0;
    double max_gate_margin = -INFINITY;      // Dini - a V - tol
    double max_trajectory_margin = -INFINITY;  // ||phi|| - bound - tol_pad
    bool gate_pass = true;
    bool trajectory_pass = true;
    bool bic_contradiction = false;
    bool pass = false;
    std::optional<BrsViolation> first_violation;
};

BrsReport brs_check(const SystemModel& model, const BrsCertificate& cert, const DisturbanceFamily& family,
                    const BrsOptions& opts = {});

}  // namespace rfc
