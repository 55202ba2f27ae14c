#include "rfc/reach.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rfc/errors.hpp"
#include "rfc/parallel.hpp"
#include "rfc/sampling.hpp"

namespace rfc {

namespace {

std::size_t upper_cell(const std::vector<double>& g, double v) {
    // index i with g[i] <= v <= g[i+1]
    auto it = std::upper_bound(g.begin(), g.end(), v);
    std::size_t i = it == g.begin() ? 0 : static_cast<std::size_t>(it - g.begin()) - 1;
    return std::min(i, g.size() >= 2 ? g.size() - 2 : 0);
}

void check_grid(const std::vector<double>& g, const char* name) {
    if (g.empty()) throw ContractError(std::string(name) + " is empty");
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!std::isfinite(g[i]) || g[i] < 0.0) throw ContractError(std::string(name) + " must be finite and >= 0");
        if (i > 0 && !(g[i] > g[i - 1])) throw ContractError(std::string(name) + " must be strictly ascending");
    }
}

// Running maximum of ||x(s)|| for s <= t_grid[j], from a trajectory whose
// samples include every t_grid entry.
void accumulate(const Trajectory& tr, const std::vector<double>& t_grid, std::vector<double>& out) {
    out.assign(t_grid.size(), 0.0);
    double run = 0.0;
    std::size_t i = 0;
    for (std::size_t j = 0; j < t_grid.size(); ++j) {
        while (i < tr.times.size() && tr.times[i] <= t_grid[j]) run = std::max(run, tr.states[i++].norm());
        out[j] = run;
    }
}

std::vector<double> trajectory_profile(const SystemModel& model, const State& x, const Signal& u,
                                       const std::vector<double>& t_grid, double tol) {
    EvolveOptions eo;
    eo.tol = tol;
    eo.output_times = t_grid;
    const double T = t_grid.back();
    std::vector<double> out(t_grid.size(), x.norm());
    if (T == 0.0) return out;
    const auto tr = evolve(model, x, u, T, eo);
    if (tr.blew_up()) throw NonRfcWitness("sampled trajectory blows up", x, u, tr.t_esc);
    accumulate(tr, t_grid, out);
    return out;
}

std::vector<State> sphere_points(Rng& rng, std::size_t n, double r, std::size_t count) {
    std::vector<State> pts;
    if (n == 1) {
        pts.push_back(State::Constant(1, r));
        if (r > 0.0) pts.push_back(State::Constant(1, -r));
        return pts;
    }
    if (r == 0.0) {
        pts.push_back(State::Zero(static_cast<Eigen::Index>(n)));
        return pts;
    }
    for (std::size_t i = 0; i < count; ++i) pts.push_back(random_unit(rng, n) * r);
    return pts;
}

// Grid representation of a lattice signal: values on [j delta, (j+1) delta)
// for j < J and the tail afterwards.
std::vector<Vec> grid_values(const Signal& u, double delta, std::size_t J) {
    std::vector<Vec> v;
    v.reserve(J + 1);
    for (std::size_t j = 0; j <= J; ++j) v.push_back(u.at(delta * static_cast<double>(j)));
    return v;
}

Signal from_grid_values(const std::vector<Vec>& v, double delta) {
    std::vector<double> ts;
    std::vector<Vec> vals;
    for (std::size_t j = 0; j + 1 < v.size(); ++j) {
        ts.push_back(delta * static_cast<double>(j + 1));
        vals.push_back(v[j]);
    }
    return Signal(std::move(ts), std::move(vals), v.back());
}

}  // namespace

double Envelope::eval(double r, double t) const {
    if (r < r_grid.front() || r > r_grid.back() || t < t_grid.front() || t > t_grid.back())
        throw DomainError("envelope evaluated outside its grid");
    const auto lerp_w = [](const std::vector<double>& g, std::size_t i, double v) {
        return g.size() < 2 ? 0.0 : (v - g[i]) / (g[i + 1] - g[i]);
    };
    const std::size_t i = upper_cell(r_grid, r), j = upper_cell(t_grid, t);
    const double wr = lerp_w(r_grid, i, r), wt = lerp_w(t_grid, j, t);
    const auto at = [&](std::size_t a, std::size_t b) {
        return values(static_cast<Eigen::Index>(std::min(a, r_grid.size() - 1)),
                      static_cast<Eigen::Index>(std::min(b, t_grid.size() - 1)));
    };
    return (1 - wr) * ((1 - wt) * at(i, j) + wt * at(i, j + 1)) + wr * ((1 - wt) * at(i + 1, j) + wt * at(i + 1, j + 1));
}

bool Envelope::is_monotone() const {
    for (Eigen::Index i = 0; i < values.rows(); ++i)
        for (Eigen::Index j = 0; j < values.cols(); ++j) {
            if (i > 0 && values(i, j) < values(i - 1, j)) return false;
            if (j > 0 && values(i, j) < values(i, j - 1)) return false;
        }
    return true;
}

Envelope envelope_estimate(const SystemModel& model, const DisturbanceFamily& family,
                           const std::vector<double>& r_grid, const std::vector<double>& t_grid,
                           const EnvelopeOptions& opts) {
    check_grid(r_grid, "r_grid");
    check_grid(t_grid, "t_grid");
    if (family.unbounded()) throw DomainError("envelope certification needs a bounded disturbance radius");
    if (family.input_dim() != model.m) throw ContractError("family input dimension does not match the model");

    Envelope env;
    env.r_grid = r_grid;
    env.t_grid = t_grid;
    env.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(r_grid.size()), static_cast<Eigen::Index>(t_grid.size()));
    env.n_sphere = model.n == 1 ? 2 : opts.n_sphere;
    env.family_ref = {family.R(), family.delta(), family.size(), family.seed()};

    const auto members = family.members();
    const std::size_t J = static_cast<std::size_t>(std::llround(family.horizon() / family.delta()));
    std::vector<State> warm;  // unit directions of previous maximisers

    for (std::size_t ri = 0; ri < r_grid.size(); ++ri) {
        const double r = r_grid[ri];
        Rng rng(derive_seed(opts.seed, ri));
        std::vector<State> xs = sphere_points(rng, model.n, r, opts.n_sphere);
        if (r > 0.0 && model.n > 1)
            for (const auto& d : warm) xs.push_back(d * r);
        for (const auto& x : opts.extra_states)
            if (x.norm() <= r) xs.push_back(x);

        const std::size_t nx = xs.size(), nu = members.size();
        std::vector<std::vector<double>> prof(nx * nu);
        parallel_for(nx * nu, opts.jobs, [&](std::size_t idx) {
            prof[idx] = trajectory_profile(model, xs[idx / nu], members[idx % nu], t_grid, opts.tol);
        });

        auto row = env.values.row(static_cast<Eigen::Index>(ri));
        const std::size_t last = t_grid.size() - 1;
        for (std::size_t idx = 0; idx < prof.size(); ++idx)
            for (std::size_t j = 0; j < t_grid.size(); ++j)
                row[static_cast<Eigen::Index>(j)] = std::max(row[static_cast<Eigen::Index>(j)], prof[idx][j]);

        // Warm-start directions: maximiser for every t column.
        std::vector<State> next_warm;
        if (r > 0.0) {
            for (std::size_t j = 0; j < t_grid.size(); ++j) {
                std::size_t best = 0;
                for (std::size_t idx = 1; idx < prof.size(); ++idx)
                    if (prof[idx][j] > prof[best][j]) best = idx;
                if (xs[best / nu].norm() == 0.0) continue;
                const State d = xs[best / nu].normalized();
                const bool seen = std::any_of(next_warm.begin(), next_warm.end(),
                                              [&](const State& w) { return (w - d).norm() < 1e-12; });
                if (!seen) next_warm.push_back(d);
            }
        }

        if (opts.refine && J > 0 && !family.lattice().empty()) {
            // best state per member at the final column, then the top-q members
            std::vector<std::pair<double, std::size_t>> score;  // (value, idx)
            for (std::size_t ui = 0; ui < nu; ++ui) {
                std::size_t best = ui;
                for (std::size_t xi = 0; xi < nx; ++xi)
                    if (prof[xi * nu + ui][last] > prof[best][last]) best = xi * nu + ui;
                score.emplace_back(prof[best][last], best);
            }
            std::stable_sort(score.begin(), score.end(),
                             [](const auto& a, const auto& b) { return a.first > b.first; });
            const std::size_t q = std::min(opts.refine_top, score.size());
            std::vector<std::vector<double>> refined(q);
            parallel_for(q, opts.jobs, [&](std::size_t s) {
                const std::size_t idx = score[s].second;
                const State& x = xs[idx / nu];
                auto vals = grid_values(members[idx % nu], family.delta(), J);
                auto best_prof = prof[idx];
                for (std::size_t sweep = 0; sweep < opts.refine_sweeps; ++sweep) {
                    bool improved = false;
                    for (std::size_t pos = 0; pos <= J; ++pos) {
                        for (const auto& lv : family.lattice()) {
                            if (lv == vals[pos]) continue;
                            auto trial = vals;
                            trial[pos] = lv;
                            auto p = trajectory_profile(model, x, from_grid_values(trial, family.delta()), t_grid, opts.tol);
                            if (p[last] > best_prof[last]) {
                                best_prof = std::move(p);
                                vals = std::move(trial);
                                improved = true;
                            }
                        }
                    }
                    if (!improved) break;
                }
                refined[s] = std::move(best_prof);
            });
            for (const auto& p : refined)
                for (std::size_t j = 0; j < t_grid.size(); ++j)
                    row[static_cast<Eigen::Index>(j)] = std::max(row[static_cast<Eigen::Index>(j)], p[j]);
            env.refined_signals += q;
        }
        if (!next_warm.empty()) warm = std::move(next_warm);
    }

    // Interior points are covered by the smaller radii: cumulative max in r, then t.
    for (Eigen::Index i = 1; i < env.values.rows(); ++i) env.values.row(i) = env.values.row(i).cwiseMax(env.values.row(i - 1));
    for (Eigen::Index j = 1; j < env.values.cols(); ++j) env.values.col(j) = env.values.col(j).cwiseMax(env.values.col(j - 1));
    return env;
}

XiForm mu_to_xi(const Envelope& env) {
    if (!env.is_monotone()) throw ContractError("envelope is not monotone");
    const auto& rg = env.r_grid;
    const auto& tg = env.t_grid;
    auto rpos = std::find_if(rg.begin(), rg.end(), [](double r) { return r > 0.0; });
    if (rpos == rg.end()) throw ContractError("envelope needs a positive radius");
    const double r_min = *rpos;

    std::vector<double> s;
    for (double v : rg)
        if (v >= r_min) s.push_back(v);
    for (double v : tg)
        if (v >= r_min) s.push_back(v);
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());

    const auto zeta_at = [&](double v) {
        const double r = std::clamp(v, rg.front(), rg.back());
        const double t = std::clamp(v, tg.front(), tg.back());
        return env.eval(r, t) + v;
    };
    std::vector<double> zeta_vals;
    for (double v : s) zeta_vals.push_back(zeta_at(v));
    // running max keeps zeta monotone after interpolation round-off
    for (std::size_t i = 1; i < zeta_vals.size(); ++i) zeta_vals[i] = std::max(zeta_vals[i], zeta_vals[i - 1]);
    const double zeta0 = zeta_vals.front();

    std::vector<double> xk{0.0}, xv{0.0};
    for (std::size_t i = 0; i < s.size(); ++i) {
        xk.push_back(s[i]);
        xv.push_back(zeta_vals[i] - zeta0);
    }
    // zeta itself, extended to 0 by its value at r_min
    std::vector<double> zk2{0.0}, zv2{zeta0};
    for (std::size_t i = 0; i < s.size(); ++i) {
        zk2.push_back(s[i]);
        zv2.push_back(zeta_vals[i]);
    }
    // past the table zeta(s) = mu(r_max, t_max) + s
    const double s_top = s.back();
    XiForm out{MonotoneFn(std::move(xk), std::move(xv), 1.0, s_top), 2.0 * zeta0, zeta0,
               MonotoneFn(std::move(zk2), std::move(zv2), 1.0, s_top), rg.back(), tg.back()};
    return out;
}

RfcBoundReport rfc_bound_check(const SystemModel& model, const DisturbanceFamily& family, const XiForm& xi,
                               const RfcBoundOptions& opts) {
    if (!(opts.t_max > 0.0)) throw DomainError("t_max must be positive");
    const auto members = family.members();
    struct Case {
        State x;
        std::size_t member;
        double violation = -INFINITY;
        double t = 0.0;
        double max_norm = 0.0;
    };
    std::vector<Case> cases(opts.n_cases);
    Rng rng(opts.seed);
    for (auto& c : cases) {
        c.x = random_in_ball(rng, model.n, opts.state_radius);
        c.member = pick_index(rng, members.size());
    }
    parallel_for(cases.size(), opts.jobs, [&](std::size_t i) {
        auto& c = cases[i];
        EvolveOptions eo;
        eo.tol = opts.tol;
        const auto tr = evolve(model, c.x, members[c.member], opts.t_max, eo);
        if (tr.blew_up()) throw NonRfcWitness("sampled trajectory blows up", c.x, members[c.member], tr.t_esc);
        const double bx = xi.xi(c.x.norm());
        for (std::size_t k = 0; k < tr.times.size(); ++k) {
            const double nrm = tr.states[k].norm();
            const double v = nrm - (bx + xi.xi(tr.times[k]) + xi.c);
            c.max_norm = std::max(c.max_norm, nrm);
            if (v > c.violation) c.violation = v, c.t = tr.times[k];
        }
    });
    RfcBoundReport rep;
    rep.cases = cases.size();
    double max_norm = 0.0;
    std::size_t worst = 0;
    for (std::size_t i = 0; i < cases.size(); ++i) {
        max_norm = std::max(max_norm, cases[i].max_norm);
        if (cases[i].violation > cases[worst].violation) worst = i;
    }
    if (!cases.empty()) {
        rep.max_violation = cases[worst].violation;
        rep.worst_x = cases[worst].x;
        rep.worst_t = cases[worst].t;
        rep.worst_member = cases[worst].member;
    }
    rep.integrator_pad = 50.0 * opts.tol * (1.0 + max_norm);
    rep.pad = opts.tol_pad + rep.integrator_pad;
    rep.pass = rep.max_violation <= rep.pad;
    return rep;
}

std::vector<DivergencePoint> divergence_probe(const SystemModel& model, const std::vector<double>& R_schedule,
                                              double t_probe, const State& x0, const DivergenceOptions& opts) {
    if (!(t_probe > 0.0)) throw DomainError("t_probe must be positive");
    std::vector<DivergencePoint> out;
    for (std::size_t i = 0; i < R_schedule.size(); ++i) {
        const double R = R_schedule[i];
        if (i > 0 && !(R > R_schedule[i - 1])) throw ContractError("R_schedule must be ascending");
        const auto fam = sample_family({R, opts.delta, opts.lattice_size, opts.n_random, opts.horizon, opts.seed, model.m});
        EnvelopeOptions eo;
        eo.n_sphere = opts.n_sphere;
        eo.seed = opts.seed;
        eo.tol = opts.tol;
        eo.jobs = opts.jobs;
        eo.extra_states = {x0};
        DivergencePoint p;
        p.R = R;
        try {
            const auto env = envelope_estimate(model, fam, {x0.norm()}, {0.0, t_probe}, eo);
            p.value = env.values(0, 1);
        } catch (const NonRfcWitness& w) {
            p.value = INFINITY;
            p.blew_up = true;
            p.t_esc = w.t_esc();
        }
        out.push_back(p);
    }
    return out;
}

}  // namespace rfc
