#include "rfc/lyap.hpp"

#include <algorithm>
#include <cmath>

#include "rfc/errors.hpp"
#include "rfc/parallel.hpp"
#include "rfc/sampling.hpp"

namespace rfc {

double horizon(double R, int k, const XiForm& xi) {
    if (!(R >= 0.0)) throw DomainError("horizon: R must be >= 0");
    if (k < 1) throw DomainError("horizon: k must be >= 1");
    const double A = R + xi.xi.invert(xi.c);
    const double level = 1.0 / k;
    const auto g = [A](double t) { return std::exp(-t) * (A + t); };
    // g increases up to max(0, 1 - A) and decreases afterwards.
    double lo = std::max(0.0, 1.0 - A);
    if (g(lo) <= level) return 0.0;
    double hi = lo + 1.0;
    while (g(hi) > level) hi = lo + 2.0 * (hi - lo);
    while (hi - lo > 1e-9) {
        const double mid = 0.5 * (lo + hi);
        (g(mid) > level ? lo : hi) = mid;
    }
    return hi;
}

double LyapConstruction::T(std::size_t R, int k) const {
    if (k < 1 || k > K) throw DomainError("k outside the construction table");
    if (R <= R_max) return T_table(static_cast<Eigen::Index>(R), k - 1);
    return horizon(static_cast<double>(R), k, xi_form);
}

double LyapConstruction::M(std::size_t R, int k) const {
    if (k < 1 || k > K || R > R_max) throw DomainError("(R, k) outside the construction table");
    return M_table(static_cast<Eigen::Index>(R), k - 1);
}

double LyapConstruction::weight(int k) const {
    return std::ldexp(1.0, -k) / (1.0 + M(static_cast<std::size_t>(k), k));
}

LyapConstruction build_construction(const SystemModel& model, const DisturbanceFamily& family, const XiForm& xi,
                                    const LyapOptions& opts) {
    if (!(opts.R_work >= 0.0) || !std::isfinite(opts.R_work)) throw DomainError("R_work must be finite and >= 0");
    if (opts.t_points < 1) throw ContractError("t_points must be >= 1");
    if (!xi.xi.is_kinf()) throw ContractError("xi must vanish at 0");

    const MonotoneFn rho = lipschitz_lower_bound(xi.xi.inverse());
    const double C_upper = xi.xi.invert(xi.c) + std::exp(-1.0);
    int K = opts.K;
    if (K <= 0) K = std::max(20, static_cast<int>(std::ceil(std::log2((opts.R_work + C_upper) / opts.tail_tol))));
    const std::size_t R_max = std::max<std::size_t>(static_cast<std::size_t>(K),
                                                    static_cast<std::size_t>(std::ceil(opts.R_work)));
    const auto rows = static_cast<Eigen::Index>(R_max + 1);

    LyapConstruction c{rho, xi, family, K, R_max, Eigen::MatrixXd(rows, K), Eigen::MatrixXd(rows, K)};
    c.t_points = opts.t_points;
    c.tol = opts.tol;
    c.R_work = opts.R_work;
    c.C_upper = C_upper;
    for (Eigen::Index R = 0; R < rows; ++R)
        for (int k = 1; k <= K; ++k) c.T_table(R, k - 1) = horizon(static_cast<double>(R), k, xi);

    const std::size_t cells = static_cast<std::size_t>(rows) * static_cast<std::size_t>(K);
    std::vector<double> m(cells, 0.0);
    parallel_for(cells, opts.jobs, [&](std::size_t idx) {
        const auto R = static_cast<Eigen::Index>(idx / static_cast<std::size_t>(K));
        const int k = static_cast<int>(idx % static_cast<std::size_t>(K)) + 1;
        const double T = c.T_table(R, k - 1);
        if (T == 0.0) {
            m[idx] = 1.0 / 3.0;  // phi(0, ., u) is the identity
            return;
        }
        LipschitzOptions lo;
        lo.n_pairs = opts.lip_pairs;
        lo.seed = derive_seed(opts.seed, idx);
        lo.tol = opts.tol;
        const double r = std::max(static_cast<double>(R), 1e-6);
        lo.r_env = xi.bound(r, T);
        m[idx] = lipschitz_estimate(model, T, r, family, lo).value() / 3.0;
    });
    for (Eigen::Index R = 0; R < rows; ++R)
        for (int k = 1; k <= K; ++k) c.M_table(R, k - 1) = m[static_cast<std::size_t>(R) * K + (k - 1)];
    for (Eigen::Index R = 0; R < rows; ++R)
        for (int k = 0; k < K; ++k) {
            if (R > 0) c.M_table(R, k) = std::max(c.M_table(R, k), c.M_table(R - 1, k));
            if (k > 0) c.M_table(R, k) = std::max(c.M_table(R, k), c.M_table(R, k - 1));
        }

    for (int k = 1; k <= K; ++k) c.C2 += c.weight(k) / k;
    const auto Rw = static_cast<std::size_t>(std::ceil(opts.R_work));
    double T_ref = c.T(Rw, K);
    if (T_ref == 0.0) T_ref = c.T(R_max, K);
    c.t_step = T_ref > 0.0 ? T_ref / static_cast<double>(opts.t_points) : 1.0;
    c.xi_range_ok = xi.r_valid >= opts.R_work && xi.t_valid >= c.T(Rw, K);
    return c;
}

VkProfile vk_all(const LyapConstruction& c, const SystemModel& model, const State& x, std::span<const Signal> members,
                 int K) {
    if (K <= 0) K = c.K;
    if (K > c.K) throw DomainError("vk_all: K exceeds the construction table");
    if (members.empty()) members = c.family.members();

    VkProfile out;
    out.V.assign(static_cast<std::size_t>(K), 0.0);
    out.R_index = static_cast<std::size_t>(std::ceil(x.norm()));
    std::vector<double> Tk(static_cast<std::size_t>(K));
    for (int k = 1; k <= K; ++k) Tk[k - 1] = c.T(out.R_index, k);
    const double T_max = *std::max_element(Tk.begin(), Tk.end());
    const auto g_of = [&](double t, double nrm) { return std::exp(-t) * c.rho(nrm / 3.0); };

    const double step = c.t_step;
    if (T_max == 0.0 || T_max / step <= 1e-9) {
        const double g = g_of(0.0, x.norm());
        for (int k = 1; k <= K; ++k) out.V[k - 1] = gk_eval(k, g);
        return out;
    }

    // One global lattice j * t_step shared by every state, so nearby states
    // are compared on the same samples. Each V_k runs up to the first lattice
    // point at or beyond T(R, k).
    std::vector<std::size_t> cut(Tk.size());
    for (std::size_t k = 0; k < Tk.size(); ++k) cut[k] = static_cast<std::size_t>(std::ceil(Tk[k] / step - 1e-9));
    const std::size_t J = *std::max_element(cut.begin(), cut.end());
    std::vector<double> times(J + 1);
    for (std::size_t j = 0; j <= J; ++j) times[j] = step * static_cast<double>(j);

    EvolveOptions eo;
    eo.tol = c.tol;
    eo.output_times = times;
    eo.record_nodes = false;
    double speed = 0.0;  // sampled bound on |d/dt e^{-t} rho(||phi|| / 3)|
    std::vector<double> best(static_cast<std::size_t>(K), 0.0);
    std::vector<double> run(J + 1);
    for (const Signal& u : members) {
        const auto tr = evolve(model, x, u, times.back(), eo);
        if (tr.blew_up()) throw NonRfcWitness("trajectory blows up inside the V_k horizon", x, u, tr.t_esc);
        double acc = 0.0;
        std::size_t i = 0;
        for (std::size_t j = 0; j <= J; ++j) {
            const double t = times[j];
            while (i + 1 < tr.times.size() && tr.times[i] < t) ++i;
            const State& s = tr.states[i];
            const double nrm = s.norm();
            acc = std::max(acc, g_of(t, nrm));
            run[j] = acc;
            speed = std::max(speed, std::exp(-t) * (c.rho(nrm / 3.0) + model.eval(s, u.at(t)).norm() / 3.0));
        }
        for (std::size_t k = 0; k < Tk.size(); ++k) best[k] = std::max(best[k], run[cut[k]]);
    }
    for (int k = 1; k <= K; ++k) out.V[k - 1] = gk_eval(k, best[k - 1]);
    out.time_pad = 0.5 * speed * step;
    return out;
}

double vk_eval(const LyapConstruction& c, const SystemModel& model, int k, const State& x) {
    if (k < 1 || k > c.K) throw DomainError("vk_eval: k outside the construction table");
    return vk_all(c, model, x, {}, k).V[k - 1];
}

WValue w_eval(const LyapConstruction& c, const SystemModel& model, const State& x, int K) {
    if (K <= 0) K = c.K;
    const auto prof = vk_all(c, model, x, {}, K);
    WValue w;
    for (int k = 1; k <= K; ++k) w.value += c.weight(k) * prof.V[k - 1];
    w.tail = std::ldexp(1.0, -K) * (x.norm() + c.C_upper);
    w.time_pad = prof.time_pad;
    return w;
}

double psi1_eval(const LyapConstruction& c, double r, int K) {
    if (K <= 0) K = c.K;
    const double base = c.rho(r / 3.0);
    double s = 0.0;
    for (int k = 1; k <= K; ++k) s += c.weight(k) * gk_eval(k, base);
    return s;
}

std::vector<GrowthRecord> growth_check(const LyapConstruction& c, const SystemModel& model, const State& x,
                                       const Signal& v, double h, const std::vector<int>& ks) {
    if (!(h > 0.0)) throw DomainError("growth_check: h must be positive");
    const int K = *std::max_element(ks.begin(), ks.end());
    const State xh = flow_at(model, x, v, h, c.tol);
    const auto after = vk_all(c, model, xh, {}, K);
    const auto base = vk_all(c, model, x, {}, K);

    std::vector<Signal> augmented(c.family.members().begin(), c.family.members().end());
    for (const Signal& u : c.family.members()) augmented.push_back(concat(v, u, h));
    const auto aug = vk_all(c, model, x, augmented, K);

    const double eh = std::exp(h);
    const double integrator_pad = 50.0 * c.tol * (1.0 + xh.norm());
    std::vector<GrowthRecord> out;
    for (int k : ks) {
        GrowthRecord r;
        r.k = k;
        r.h = h;
        r.lhs = after.V[k - 1];
        r.family_gap = eh * std::max(0.0, aug.V[k - 1] - base.V[k - 1]);
        r.rhs = eh * base.V[k - 1] + (eh - 1.0) / k + r.family_gap;
        r.pad = eh * aug.time_pad + integrator_pad;
        r.margin = r.lhs - r.rhs;
        r.pass = r.margin <= r.pad;
        out.push_back(r);
    }
    return out;
}

std::vector<double> default_h_seq() {
    return {1e-2, 5e-3, 2e-3, 1e-3, 5e-4, 2e-4, 1e-4, 5e-5, 2e-5, 1e-5};
}

double dini_tolerance(const std::vector<double>& h_seq, double V) {
    const double h_min = *std::min_element(h_seq.begin(), h_seq.end());
    return std::max(1e-4, 10.0 * h_min) * (1.0 + V);
}

DiniEstimate dini_estimate(const SystemModel& model, const Evaluator& V, const State& x, const Signal& u,
                           const std::vector<double>& h_seq, double tol) {
    if (h_seq.size() < 2) throw ContractError("dini_estimate: need at least two step sizes");
    for (std::size_t i = 0; i < h_seq.size(); ++i)
        if (!(h_seq[i] > 0.0) || (i > 0 && !(h_seq[i] < h_seq[i - 1])))
            throw ContractError("dini_estimate: h_seq must be positive and decreasing");

    EvolveOptions eo;
    eo.tol = tol;
    eo.output_times = h_seq;
    eo.record_nodes = false;
    const auto tr = evolve(model, x, u, h_seq.front(), eo);
    if (tr.blew_up()) throw MaximalIntervalError("flow blows up before the largest Dini step", tr.t_esc);

    const double v0 = V(x);
    DiniEstimate d;
    d.h = h_seq;
    for (double h : h_seq) {
        const auto it = std::find(tr.times.begin(), tr.times.end(), h);
        const State& xh = tr.states[static_cast<std::size_t>(it - tr.times.begin())];
        d.quotients.push_back((V(xh) - v0) / h);
    }
    const std::size_t n = d.quotients.size();
    d.value = std::max(d.quotients[n - 1], d.quotients[n - 2]);
    if (n >= 3) {
        const double last = std::abs(d.quotients[n - 1] - d.quotients[n - 2]);
        const double prev = std::abs(d.quotients[n - 2] - d.quotients[n - 3]);
        d.converging = last <= prev + 1e-9 * (1.0 + std::abs(d.value));
    }
    return d;
}

DissipationReport dissipation_check(const SystemModel& model, const Evaluator& V, const DisturbanceFamily& family,
                                    double a, double M, const DissipationOptions& opts) {
    const auto members = family.members();
    DissipationReport rep;
    rep.h_seq = opts.h_seq;
    rep.records.resize(opts.n_states);
    Rng rng(opts.seed);
    for (auto& r : rep.records) {
        r.x = random_in_ball(rng, model.n, opts.state_radius);
        r.member = pick_index(rng, members.size());
    }
    parallel_for(rep.records.size(), opts.jobs, [&](std::size_t i) {
        auto& r = rep.records[i];
        const auto d = dini_estimate(model, V, r.x, members[r.member], opts.h_seq, opts.tol);
        r.dini = d.value;
        r.converging = d.converging;
        r.V = V(r.x);
        r.bound = a * r.V + M;
        r.margin = r.dini - r.bound;
        r.tol = dini_tolerance(opts.h_seq, r.V);
    });
    for (const auto& r : rep.records) {
        rep.max_violation = std::max(rep.max_violation, r.margin);
        rep.max_excess = std::max(rep.max_excess, r.margin - r.tol);
        if (!r.converging) ++rep.non_converging;
    }
    rep.pass = rep.records.empty() || rep.max_excess <= 0.0;
    return rep;
}

SandwichReport sandwich_check(const LyapConstruction& c, const SystemModel& model, std::size_t n_states,
                              double radius, std::uint64_t seed, double pad, unsigned jobs) {
    std::vector<State> xs(n_states);
    Rng rng(seed);
    for (auto& x : xs) x = random_in_ball(rng, model.n, radius);
    SandwichReport rep;
    rep.records.resize(n_states);
    parallel_for(n_states, jobs, [&](std::size_t i) {
        auto& r = rep.records[i];
        const double nrm = xs[i].norm();
        r.x = xs[i];
        r.W = w_eval(c, model, xs[i]).value;
        r.psi1 = psi1_eval(c, nrm);
        r.upper = nrm + c.C_upper + pad;
    });
    rep.pad = pad;
    rep.states = n_states;
    for (const auto& r : rep.records) {
        rep.max_lower_violation = std::max(rep.max_lower_violation, r.psi1 - r.W);
        rep.max_upper_violation = std::max(rep.max_upper_violation, r.W - r.upper);
    }
    rep.pass = n_states == 0 || (rep.max_lower_violation <= 0.0 && rep.max_upper_violation <= 0.0);
    return rep;
}

double comparison_bound(double y0, double a, double M, double t) {
    if (!(a > 0.0)) throw DomainError("comparison_bound: a must be positive");
    if (!(M >= 0.0)) throw DomainError("comparison_bound: M must be >= 0");
    if (!(t >= 0.0)) throw DomainError("comparison_bound: t must be >= 0");
    const double e = std::exp(a * t);
    return y0 * e + (M / a) * std::expm1(a * t);
}

double rfc_from_lyapunov(const MonotoneFn& psi1, const MonotoneFn& psi2, double C, double a, double M, double r,
                         double t) {
    if (!(a > 0.0)) throw DomainError("rfc_from_lyapunov: a must be positive");
    return psi1.invert(comparison_bound(psi2(r) + C, a, M, t));
}

std::string to_string(BrsViolationKind kind) {
    switch (kind) {
        case BrsViolationKind::Gate: return "gate";
        case BrsViolationKind::Trajectory: return "trajectory";
        case BrsViolationKind::Blowup: return "blowup";
    }
    return "unknown";
}

BrsReport brs_check(const SystemModel& model, const BrsCertificate& cert, const DisturbanceFamily& family,
                    const BrsOptions& opts) {
    if (!(cert.a > 0.0)) throw DomainError("brs_check: a must be positive");
    if (!(opts.tau > 0.0)) throw DomainError("brs_check: tau must be positive");
    std::vector<std::pair<State, Signal>> cases = opts.probes;
    {
        const auto members = family.members();
        Rng rng(opts.seed);
        for (std::size_t i = 0; i < opts.n_cases; ++i) {
            State x = random_in_ball(rng, model.n, opts.state_radius);
            cases.emplace_back(std::move(x), members[pick_index(rng, members.size())]);
        }
    }

    struct Outcome {
        bool active = false;
        double gate_margin = -INFINITY;
        double traj_margin = -INFINITY;
        double traj_t = 0.0;
        double traj_norm = 0.0;
        double traj_bound = 0.0;
        double dini = 0.0;
        double gate_bound = 0.0;
        double gate_tol = 0.0;
        bool blew_up = false;
        double t_esc = 0.0;
    };
    std::vector<Outcome> res(cases.size());
    parallel_for(cases.size(), opts.jobs, [&](std::size_t i) {
        const auto& [x, u] = cases[i];
        auto& o = res[i];
        const double unorm = sup_norm(u);
        const double nx = x.norm();
        const double g = cert.gamma(unorm);

        EvolveOptions eo;
        eo.tol = opts.tol;
        const auto tr = evolve(model, x, u, opts.tau, eo);
        if (tr.blew_up()) {
            o.blew_up = true;
            o.t_esc = tr.t_esc;
            return;
        }
        const double b31 = std::max(nx, g);
        const double b32 = cert.psi1.invert(std::exp(cert.a * opts.tau) * (cert.psi2(b31) + cert.C));
        const double bound = std::max(b31, b32);
        for (std::size_t k = 0; k < tr.times.size(); ++k) {
            const double nrm = tr.states[k].norm();
            const double m = nrm - bound - opts.tol_pad - 50.0 * opts.tol * (1.0 + nrm);
            if (m > o.traj_margin) o.traj_margin = m, o.traj_t = tr.times[k], o.traj_norm = nrm;
        }
        o.traj_bound = bound;

        if (nx >= g) {
            o.active = true;
            const auto d = dini_estimate(model, cert.V, x, u, opts.h_seq, opts.tol);
            const double v = cert.V(x);
            o.dini = d.value;
            o.gate_bound = cert.a * v;
            o.gate_tol = dini_tolerance(opts.h_seq, v);
            o.gate_margin = d.value - o.gate_bound - o.gate_tol;
        }
    });

    BrsReport rep;
    rep.cases = cases.size();
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const auto& o = res[i];
        const auto& [x, u] = cases[i];
        rep.records.push_back({x, sup_norm(u), o.active, o.dini, o.gate_bound, o.gate_tol, o.gate_margin,
                               o.traj_bound, o.traj_norm, o.traj_margin, o.blew_up, o.t_esc});
        std::optional<BrsViolation> v;
        if (o.blew_up) {
            rep.bic_contradiction = true;
            v = BrsViolation{BrsViolationKind::Blowup, x, u, o.t_esc, o.t_esc, 0.0};
        } else {
            rep.max_trajectory_margin = std::max(rep.max_trajectory_margin, o.traj_margin);
            if (o.traj_margin > 0.0) {
                rep.trajectory_pass = false;
                v = BrsViolation{BrsViolationKind::Trajectory, x, u, o.traj_t, o.traj_norm, o.traj_bound};
            }
            if (o.active) {
                ++rep.gate_active;
                rep.max_gate_margin = std::max(rep.max_gate_margin, o.gate_margin);
                if (o.gate_margin > 0.0) {
                    rep.gate_pass = false;
                    v = BrsViolation{BrsViolationKind::Gate, x, u, 0.0, o.dini, o.gate_bound};
                }
            }
        }
        if (v && !rep.first_violation) rep.first_violation = std::move(v);
    }
    rep.pass = rep.gate_pass && rep.trajectory_pass && !rep.bic_contradiction;
    return rep;
}

}  // namespace rfc
