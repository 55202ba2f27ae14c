#include "rfc/flow.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "rfc/errors.hpp"
#include "rfc/sampling.hpp"

namespace rfc {

std::string to_string(FieldId id) {
    switch (id) {
        case FieldId::ScalarXu: return "scalar_xu";
        case FieldId::ScalarRfc: return "scalar_rfc";
        case FieldId::Linear: return "linear";
        case FieldId::Quadratic: return "quadratic";
        case FieldId::DecayPlusInput: return "decay_plus_input";
    }
    return "unknown";
}

FieldId field_id_from_string(const std::string& name) {
    for (FieldId id : {FieldId::ScalarXu, FieldId::ScalarRfc, FieldId::Linear, FieldId::Quadratic,
                       FieldId::DecayPlusInput})
        if (to_string(id) == name) return id;
    throw std::invalid_argument("unknown field_id '" + name + "'");
}

State SystemModel::eval(const State& x, const Vec& u) const {
    switch (field) {
        case FieldId::ScalarXu: return x * u[0];
        case FieldId::ScalarRfc: return x / (1.0 + std::abs(u[0]));
        case FieldId::Linear: return A * x + B * u;
        case FieldId::Quadratic: return x.cwiseProduct(x);
        case FieldId::DecayPlusInput: return -x + u;
    }
    throw std::logic_error("SystemModel::eval: unknown field");
}

bool SystemModel::preserves_origin() const {
    return field != FieldId::DecayPlusInput && !(field == FieldId::Linear && B.norm() > 0.0);
}

SystemModel SystemModel::scalar_xu() { return SystemModel{FieldId::ScalarXu, 1, 1, {}, {}, {}}; }

SystemModel SystemModel::scalar_rfc() { return SystemModel{FieldId::ScalarRfc, 1, 1, {}, {}, {}}; }

SystemModel SystemModel::linear(Eigen::MatrixXd A, Eigen::MatrixXd B) {
    if (A.rows() != A.cols() || B.rows() != A.rows() || A.rows() == 0 || B.cols() == 0)
        throw std::invalid_argument("SystemModel::linear: A must be n x n and B n x m");
    const auto n = static_cast<std::size_t>(A.rows());
    const auto m = static_cast<std::size_t>(B.cols());
    return SystemModel{FieldId::Linear, n, m, std::move(A), std::move(B), {}};
}

SystemModel SystemModel::quadratic() { return SystemModel{FieldId::Quadratic, 1, 1, {}, {}, {}}; }

SystemModel SystemModel::decay_plus_input() {
    return SystemModel{FieldId::DecayPlusInput, 1, 1, {}, {}, {}};
}

namespace {

// Lipschitz bounds that do not depend on the radius are stored as an almost
// flat monotone function starting at the constant.
MonotoneFn constant_bound(double L) {
    return MonotoneFn({0.0, 1e3}, {L, L}, MonotoneFn::kSlopeFloor, 1e3);
}

}  // namespace

MonotoneFn catalog_lip_bound(const SystemModel& model, double R) {
    switch (model.field) {
        case FieldId::ScalarXu: return constant_bound(R);          // d/dx (x u) = u, |u| <= R
        case FieldId::ScalarRfc: return constant_bound(1.0);       // 1 / (1 + |u|) <= 1
        case FieldId::DecayPlusInput: return constant_bound(0.0);  // -1, clipped
        case FieldId::Quadratic: return MonotoneFn::linear(2.0);   // 2x on B_r
        case FieldId::Linear: {
            // Logarithmic norm: largest eigenvalue of the symmetric part of A.
            const Eigen::MatrixXd S = 0.5 * (model.A + model.A.transpose());
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
            return constant_bound(std::max(0.0, es.eigenvalues().maxCoeff()));
        }
    }
    throw std::logic_error("catalog_lip_bound: unknown field");
}

double Trajectory::max_norm() const {
    double m = 0.0;
    for (const State& s : states) m = std::max(m, s.norm());
    return m;
}

namespace {

// Dormand-Prince 5(4) tableau with its order-4 continuous extension.
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

bool finite(const State& v) { return v.allFinite(); }

struct Recorder {
    Trajectory& traj;
    const std::vector<double>& outputs;
    std::size_t next_output = 0;
    bool record_nodes;

    void push(double t, const State& x) {
        if (!traj.times.empty() && traj.times.back() == t) return;
        traj.times.push_back(t);
        traj.states.push_back(x);
    }
    // Emits output samples in (t0, t1) from the dense interpolant, then the node t1.
    template <class Dense>
    void step(double t0, double t1, const State& y1, Dense&& dense, bool force_node) {
        while (next_output < outputs.size() && outputs[next_output] <= t0) ++next_output;
        while (next_output < outputs.size() && outputs[next_output] < t1) {
            const double t = outputs[next_output++];
            push(t, dense((t - t0) / (t1 - t0)));
        }
        const bool is_output = next_output < outputs.size() && outputs[next_output] == t1;
        if (record_nodes || force_node || is_output) push(t1, y1);
    }
};

}  // namespace

Trajectory evolve(const SystemModel& model, const State& x0, const Signal& u, double T,
                  const EvolveOptions& opts) {
    if (!(T > 0.0) || !std::isfinite(T)) throw DomainError("evolve: T must be positive and finite");
    if (!(opts.tol > 0.0)) throw DomainError("evolve: tol must be positive");
    if (static_cast<std::size_t>(x0.size()) != model.n)
        throw std::invalid_argument("evolve: initial state has the wrong dimension");
    if (u.dim() != model.m) throw std::invalid_argument("evolve: input has the wrong dimension");

    Trajectory traj;
    traj.t_end = T;
    traj.integrator_tol = opts.tol;

    std::vector<double> outputs;
    for (double t : opts.output_times)
        if (t > 0.0 && t <= T) outputs.push_back(t);
    std::sort(outputs.begin(), outputs.end());
    Recorder rec{traj, outputs, 0, opts.record_nodes};
    rec.push(0.0, x0);

    std::vector<double> stops = u.breakpoints(0.0, T);
    stops.push_back(T);

    const double tol = opts.tol;
    auto error_norm = [tol](const State& y0, const State& y1, const State& err) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < err.size(); ++i) {
            const double sc = tol * (1.0 + std::max(std::abs(y0[i]), std::abs(y1[i])));
            acc += (err[i] / sc) * (err[i] / sc);
        }
        return std::sqrt(acc / static_cast<double>(err.size()));
    };

    double t = 0.0;
    State y = x0;
    if (y.norm() > opts.m_max) {
        traj.status = FlowStatus::Blowup;
        traj.t_esc = 0.0;
        traj.m_exceeded = opts.m_max;
        return traj;
    }
    double h = 0.0;
    double seg_start = 0.0;
    for (double stop : stops) {
        const Vec v = u.at(seg_start);
        State k1 = model.eval(y, v);
        if (!finite(k1)) throw ModelError("vector field is not finite", t);
        if (h <= 0.0) {
            const double fn = k1.norm();
            h = fn > 0.0 ? 0.01 * (1.0 + y.norm()) / fn : 0.1 * (stop - t);
            h = std::min(h, stop - t);
        }
        while (t < stop) {
            if (traj.steps + traj.rejected > opts.max_steps)
                throw std::runtime_error("evolve: step budget exhausted");
            bool last = false;
            double hs = h;
            if (t + hs >= stop || (stop - (t + hs)) < 1e-12 * std::max(1.0, stop)) {
                hs = stop - t;
                last = true;
            }
            if (!last && hs < opts.h_min * std::max(1.0, std::abs(t))) {
                traj.status = FlowStatus::Blowup;
                traj.t_esc = t;
                traj.m_exceeded = y.norm();
                rec.push(t, y);
                return traj;
            }
            const State k2 = model.eval(y + hs * (a21 * k1), v);
            const State k3 = model.eval(y + hs * (a31 * k1 + a32 * k2), v);
            const State k4 = model.eval(y + hs * (a41 * k1 + a42 * k2 + a43 * k3), v);
            const State k5 = model.eval(y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4), v);
            const State k6 = model.eval(y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5), v);
            const State y1 = y + hs * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
            const State k7 = model.eval(y1, v);
            double err = INFINITY;
            if (finite(y1) && finite(k7)) {
                const State e = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
                err = error_norm(y, y1, e);
            }
            if (!(err <= 1.0)) {
                ++traj.rejected;
                const double fac = std::isfinite(err) ? std::max(0.2, 0.9 * std::pow(err, -0.2)) : 0.2;
                h = hs * fac;
                continue;
            }
            const double t1 = last ? stop : t + hs;
            const State ydiff = y1 - y;
            const State bspl = hs * k1 - ydiff;
            const State r4 = ydiff - hs * k7 - bspl;
            const State r5 = hs * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
            auto dense = [&](double th) -> State {
                const double th1 = 1.0 - th;
                return y + th * (ydiff + th1 * (bspl + th * (r4 + th1 * r5)));
            };
            ++traj.steps;
            const bool escaped = y1.norm() > opts.m_max;
            rec.step(t, t1, y1, dense, (last && stop == T) || escaped);
            const double fac = err > 0.0 ? std::min(5.0, std::max(0.2, 0.9 * std::pow(err, -0.2))) : 5.0;
            if (!last) h = hs * fac;
            else h = std::max(h, hs * fac);
            t = t1;
            y = y1;
            k1 = k7;
            if (escaped) {
                traj.status = FlowStatus::Blowup;
                traj.t_esc = t;
                traj.m_exceeded = opts.m_max;
                return traj;
            }
            if (!finite(k1)) throw ModelError("vector field is not finite", t);
        }
        seg_start = stop;
    }
    return traj;
}

State flow_at(const SystemModel& model, const State& x0, const Signal& u, double t, double tol) {
    if (t < 0.0) throw DomainError("flow_at: t must be nonnegative");
    if (t == 0.0) return x0;
    EvolveOptions opts;
    opts.tol = tol;
    opts.record_nodes = false;
    const Trajectory traj = evolve(model, x0, u, t, opts);
    if (traj.blew_up())
        throw MaximalIntervalError("flow_at: solution blows up before the requested time", traj.t_esc);
    return traj.final_state();
}

AxiomReport check_axioms(const SystemModel& model, const DisturbanceFamily& family,
                         const AxiomOptions& opts) {
    AxiomReport rep;
    rep.axiom_tol = 50.0 * opts.tol;
    Rng rng(opts.seed);
    const auto members = family.members();
    for (std::size_t c = 0; c < opts.n_cases; ++c) {
        const State x = random_in_ball(rng, model.n, opts.state_radius);
        const Signal& u = members[pick_index(rng, members.size())];
        const Signal& w = members[pick_index(rng, members.size())];
        const double t = uniform(rng, 0.0, opts.t_max);
        const double h = uniform(rng, 0.0, opts.t_max);
        const double tau = uniform(rng, 0.0, opts.t_max);

        rep.identity = std::max(rep.identity, (flow_at(model, x, u, 0.0, opts.tol) - x).norm());
        try {
            const State phi_t = flow_at(model, x, u, t, opts.tol);
            const State phi_th = flow_at(model, x, u, t + h, opts.tol);

            if (t > 0.0) {
                const State alt = flow_at(model, x, concat(u, w, t), t, opts.tol);
                rep.causality = std::max(rep.causality, (phi_t - alt).norm() / (1.0 + phi_t.norm()));
            }

            const State restarted = flow_at(model, phi_t, shift(u, t), h, opts.tol);
            rep.cocycle = std::max(rep.cocycle, (phi_th - restarted).norm() / (1.0 + phi_th.norm()));

            // Small time increments must produce small state increments:
            // ||phi(tau+d) - phi(tau)|| <= d * sup ||f|| along the short arc.
            const double d = 1e-6 * std::max(1.0, opts.t_max);
            const State a = flow_at(model, x, u, tau, opts.tol);
            const State b = flow_at(model, x, u, tau + d, opts.tol);
            double speed = model.eval(a, u.at(tau)).norm();
            for (double s : u.breakpoints(tau, tau + d)) speed = std::max(speed, model.eval(a, u.at(s)).norm());
            speed = std::max(speed, model.eval(b, u.at(tau + d)).norm());
            const double excess = std::max(0.0, (b - a).norm() - 1.01 * d * speed);
            rep.continuity = std::max(rep.continuity, excess / (1.0 + a.norm()));
            ++rep.cases;
        } catch (const MaximalIntervalError&) {
            ++rep.skipped_blowup;
        }
    }
    rep.pass = rep.cases > 0 && rep.identity == 0.0 && rep.causality <= rep.axiom_tol &&
               rep.cocycle <= rep.axiom_tol && rep.continuity <= rep.axiom_tol;
    return rep;
}

LipschitzEstimate lipschitz_estimate(const SystemModel& model, double tau, double r,
                                     const DisturbanceFamily& family, const LipschitzOptions& opts) {
    if (tau < 0.0 || r < 0.0) throw DomainError("lipschitz_estimate: tau and r must be nonnegative");
    LipschitzEstimate est;
    est.empirical = 1.0;  // t = 0 contributes ratio 1
    double max_norm = r;
    if (tau > 0.0 && r > 0.0) {
        EvolveOptions eo;
        eo.tol = opts.tol;
        eo.record_nodes = false;
        const std::size_t ns = std::max<std::size_t>(opts.t_samples, 1);
        for (std::size_t j = 1; j <= ns; ++j)
            eo.output_times.push_back(tau * static_cast<double>(j) / static_cast<double>(ns));
        Rng rng(opts.seed);
        const auto members = family.members();
        for (std::size_t p = 0; p < opts.n_pairs; ++p) {
            const State x = random_in_ball(rng, model.n, r);
            State y;
            if (p % 2 == 0) {
                y = x + 1e-4 * std::max(r, 1.0) * random_unit(rng, model.n);
                if (y.norm() > r) y *= r / y.norm();
            } else {
                y = random_in_ball(rng, model.n, r);
            }
            const double gap = (x - y).norm();
            const Signal& u = members[p % members.size()];
            if (gap == 0.0) continue;
            const Trajectory tx = evolve(model, x, u, tau, eo);
            const Trajectory ty = evolve(model, y, u, tau, eo);
            if (tx.blew_up()) throw NonRfcWitness("lipschitz_estimate: blow-up (RFC violated)", x, u, tx.t_esc);
            if (ty.blew_up()) throw NonRfcWitness("lipschitz_estimate: blow-up (RFC violated)", y, u, ty.t_esc);
            for (std::size_t i = 0; i < tx.states.size() && i < ty.states.size(); ++i) {
                est.empirical = std::max(est.empirical, (tx.states[i] - ty.states[i]).norm() / gap);
                max_norm = std::max({max_norm, tx.states[i].norm(), ty.states[i].norm()});
            }
        }
    }
    est.r_env = opts.r_env.value_or(max_norm);
    if (model.lip_bound) est.certified = std::exp(std::max(0.0, (*model.lip_bound)(est.r_env)) * tau);
    return est;
}

}  // namespace rfc
