#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>

#include <CLI11.hpp>

#include "rfc/cli.hpp"
#include "rfc/errors.hpp"
#include "rfc/parallel.hpp"
#include "rfc/sampling.hpp"

namespace rfc::cli {

namespace {

// Converts library validation failures raised while building an object from
// a config section into field diagnostics.
template <class F>
auto in_field(const std::string& field, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const Json::exception& e) {
        throw ConfigError("field '" + field + "': " + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError("field '" + field + "': " + e.what());
    } catch (const std::domain_error& e) {
        throw ConfigError("field '" + field + "': " + e.what());
    }
}

double integrator_tol(const ExperimentConfig& cfg) { return cfg.section("tolerances").positive("integrator", 1e-9); }
double tol_pad(const ExperimentConfig& cfg) { return cfg.section("tolerances").positive("pad", 1e-6); }

Json header(const ExperimentConfig& cfg, const std::string& sub) {
    return {{"schema_version", kSchemaVersion}, {"subcommand", sub}, {"seed", cfg.seed}};
}

SystemModel build_model(const ExperimentConfig& cfg) {
    const Section s = cfg.section("model");
    s.text("field_id");
    SystemModel m = in_field("model", [&] { return model_from_json(cfg.doc.at("model")); });
    if (s.has("lip_bound") && s.raw("lip_bound").is_string()) {
        const auto kind = s.text("lip_bound");
        if (kind != "catalog") throw ConfigError("field 'model.lip_bound': expected \"catalog\" or a function object");
        const double R = cfg.section("family").number("R", 1.0);
        m.lip_bound = in_field("model.lip_bound", [&] { return catalog_lip_bound(m, R); });
    }
    return m;
}

Vec vec_field(const Section& s, const std::string& key, std::size_t dim) {
    const Vec v = in_field(s.field(key), [&] { return vec_from_json(s.raw(key)); });
    if (static_cast<std::size_t>(v.size()) != dim)
        throw ConfigError("field '" + s.field(key) + "': expected " + std::to_string(dim) + " components");
    return v;
}

DisturbanceFamily family_from(const ExperimentConfig& cfg, const Section& s, std::size_t input_dim) {
    const double R = s.number("R", 1.0);
    if (!(R >= 0.0)) throw ConfigError("field '" + s.field("R") + "': must be >= 0");
    const double delta = s.positive("delta", 0.5);
    const std::size_t lattice = s.count("lattice", 3);
    const double horizon = s.positive("horizon", 2.0);
    const std::uint64_t seed = s.u64("seed", cfg.seed);
    if (s.has("members")) {
        const Json& mj = s.raw("members");
        if (!mj.is_array() || mj.empty()) throw ConfigError("field '" + s.field("members") + "': expected a non-empty array");
        std::vector<Signal> members;
        for (std::size_t i = 0; i < mj.size(); ++i)
            members.push_back(in_field(s.field("members") + "[" + std::to_string(i) + "]",
                                       [&] { return signal_from_json(mj[i]); }));
        std::vector<Vec> lat;
        if (s.has("lattice_values")) {
            for (const auto& v : s.raw("lattice_values"))
                lat.push_back(in_field(s.field("lattice_values"), [&] { return vec_from_json(v); }));
        } else {
            lat = in_field(s.field("lattice"), [&] { return make_lattice(R, lattice, input_dim); });
        }
        return in_field(s.path(), [&] { return DisturbanceFamily(R, delta, lat, members, horizon, seed); });
    }
    if (std::isinf(R)) throw ConfigError("field '" + s.field("R") + "': an unbounded family needs explicit members");
    const std::size_t N = s.count("N", 10);
    return in_field(s.path(), [&] { return sample_family({R, delta, lattice, N, horizon, seed, input_dim}); });
}

DisturbanceFamily build_family(const ExperimentConfig& cfg, const SystemModel& model) {
    return family_from(cfg, cfg.section("family"), model.m);
}

MonotoneFn fn_from(const Section& s, const std::string& key, const MonotoneFn& fallback) {
    if (!s.has(key)) return fallback;
    const Json& j = s.raw(key);
    const std::string f = s.field(key);
    if (j.is_number()) return in_field(f, [&] { return MonotoneFn::linear(j.get<double>()); });
    if (j.is_string()) {
        if (j == "identity" || j == "id") return MonotoneFn::identity();
        throw ConfigError("field '" + f + "': unknown function \"" + j.get<std::string>() + "\"");
    }
    if (j.is_object() && j.contains("linear")) {
        const double slope = s.sub(key).positive("linear");
        return MonotoneFn::linear(slope);
    }
    return in_field(f, [&] { return monotone_fn_from_json(j); });
}

EnvelopeOptions envelope_options(const ExperimentConfig& cfg) {
    const Section s = cfg.section("envelope");
    EnvelopeOptions eo;
    eo.n_sphere = s.count("n_sphere", 8);
    eo.seed = s.u64("seed", cfg.seed);
    eo.tol = integrator_tol(cfg);
    eo.jobs = cfg.jobs;
    eo.refine = s.flag("refine", false);
    eo.refine_top = s.count("refine_top", 5);
    eo.refine_sweeps = s.count("refine_sweeps", 3);
    return eo;
}

Envelope compute_envelope(const ExperimentConfig& cfg, const SystemModel& model, const DisturbanceFamily& fam) {
    const Section g = cfg.section("grids");
    const auto rg = g.grid("r_grid");
    const auto tg = g.grid("t_grid");
    return envelope_estimate(model, fam, rg, tg, envelope_options(cfg));
}

XiForm build_xi(const ExperimentConfig& cfg, const SystemModel& model, const DisturbanceFamily& fam,
                std::ostream& log) {
    const Section s = cfg.section("xi");
    const std::string source = s.text("source", std::string("envelope"));
    if (source == "envelope") {
        log << "estimating the envelope for xi\n";
        return in_field("grids", [&] { return mu_to_xi(compute_envelope(cfg, model, fam)); });
    }
    if (source == "file") {
        const auto path = cfg.resolve(s.text("path"));
        std::ifstream in(path, std::ios::binary);
        if (!in) throw ConfigError("field 'xi.path': cannot read '" + path.string() + "'");
        Json j;
        try {
            j = Json::parse(in);
        } catch (const Json::parse_error& e) {
            throw ConfigError("field 'xi.path': " + path.string() + ": " + e.what());
        }
        return in_field("xi.path", [&] { return xi_from_json(j.contains("xi_form") ? j["xi_form"] : j); });
    }
    if (source == "linear") {
        XiForm xi{MonotoneFn::linear(s.positive("slope")), s.number("c", 0.0), 0.0, std::nullopt, INFINITY, INFINITY};
        if (xi.c < 0.0) throw ConfigError("field 'xi.c': must be >= 0");
        return xi;
    }
    throw ConfigError("field 'xi.source': expected \"envelope\", \"file\" or \"linear\"");
}

LyapOptions lyap_options(const ExperimentConfig& cfg) {
    const Section s = cfg.section("construction");
    LyapOptions lo;
    lo.K = static_cast<int>(s.count("K", 0));
    lo.R_work = s.number("R_work", 1.0);
    if (!(lo.R_work >= 0.0) || !std::isfinite(lo.R_work))
        throw ConfigError("field 'construction.R_work': must be finite and >= 0");
    lo.tail_tol = s.positive("tail_tol", 1e-6);
    lo.t_points = s.count("t_points", 512);
    if (lo.t_points < 1) throw ConfigError("field 'construction.t_points': must be >= 1");
    lo.tol = s.positive("tol", 1e-10);
    lo.seed = cfg.seed;
    lo.jobs = cfg.jobs;
    return lo;
}

struct Built {
    SystemModel model;
    std::optional<LyapConstruction> c = std::nullopt;
};

Built construction_for(const ExperimentConfig& cfg, std::ostream& log) {
    SystemModel model = build_model(cfg);
    const Section s = cfg.section("construction");
    if (s.has("bundle")) {
        const auto path = cfg.resolve(s.text("bundle"));
        std::ifstream in(path, std::ios::binary);
        if (!in) throw ConfigError("field 'construction.bundle': cannot read '" + path.string() + "'");
        Json j;
        try {
            j = Json::parse(in);
        } catch (const Json::parse_error& e) {
            throw ConfigError(std::string("field 'construction.bundle': ") + e.what());
        }
        log << "loading construction bundle " << path.string() << "\n";
        if (!model.lip_bound) model.lip_bound = catalog_lip_bound(model, number_from_json(j.at("family").at("R")));
        return {model, in_field("construction.bundle", [&] { return construction_from_json(j); })};
    }
    const auto fam = build_family(cfg, model);
    if (!model.lip_bound) model.lip_bound = in_field("model", [&] { return catalog_lip_bound(model, fam.R()); });
    const auto xi = build_xi(cfg, model, fam, log);
    log << "building the W construction\n";
    auto c = build_construction(model, fam, xi, lyap_options(cfg));
    log << "K = " << c.K << ", C_upper = " << c.C_upper << ", C2 = " << c.C2 << "\n";
    return {model, std::move(c)};
}

Json construction_summary(const LyapConstruction& c) {
    return {{"K", c.K},       {"R_work", c.R_work},   {"C_upper", c.C_upper}, {"C2", c.C2},
            {"t_step", c.t_step}, {"tol", c.tol}, {"xi_range_ok", c.xi_range_ok},
            {"family_size", c.family.size()}};
}

std::vector<std::string> state_columns(const std::string& prefix, std::size_t n) {
    std::vector<std::string> cols;
    for (std::size_t i = 1; i <= n; ++i) cols.push_back(prefix + std::to_string(i));
    return cols;
}

template <class... Rest>
std::vector<std::string> columns(std::vector<std::string> a, Rest&&... rest) {
    (a.insert(a.end(), rest.begin(), rest.end()), ...);
    return a;
}

void add_state(CsvTable& t, const State& x) {
    for (Eigen::Index i = 0; i < x.size(); ++i) t.add(x[i]);
}

Json witness_json(const NonRfcWitness& w) {
    return {{"message", w.what()}, {"x", to_json(w.x())}, {"u", to_json(w.u())}, {"t_esc", number_to_json(w.t_esc())}};
}

// subcommands

int cmd_axioms(const ExperimentConfig& cfg, std::ostream& log) {
    const auto model = build_model(cfg);
    const auto fam = build_family(cfg, model);
    const Section s = cfg.section("axioms");
    AxiomOptions ao;
    ao.n_cases = s.count("n_cases", 100);
    ao.seed = cfg.seed;
    ao.tol = integrator_tol(cfg);
    ao.state_radius = s.positive("state_radius", 1.0);
    ao.t_max = s.positive("t_max", 1.0);
    const auto rep = check_axioms(model, fam, ao);
    Json j = header(cfg, "axioms");
    j["model"] = to_json(model);
    j["pass"] = rep.pass;
    j["cases"] = rep.cases;
    j["skipped_blowup"] = rep.skipped_blowup;
    j["residuals"] = {{"identity", rep.identity},
                      {"causality", rep.causality},
                      {"cocycle", rep.cocycle},
                      {"continuity", rep.continuity}};
    j["pads"] = {{"axiom_tol", rep.axiom_tol}, {"integrator_tol", ao.tol}};
    write_atomic(cfg.out_dir / "axioms.json", dump_json(j));
    log << "axioms: " << (rep.pass ? "pass" : "fail") << " (cocycle " << rep.cocycle << ", causality "
        << rep.causality << ", limit " << rep.axiom_tol << ")\n";
    return rep.pass ? kPass : kFail;
}

int cmd_simulate(const ExperimentConfig& cfg, std::ostream& log) {
    const auto model = build_model(cfg);
    const Section s = cfg.section("simulate");
    const State x0 = vec_field(s, "x0", model.n);
    const Signal u = s.has("u") ? in_field(s.field("u"), [&] { return signal_from_json(s.raw("u")); })
                                : Signal::constant(Vec::Zero(static_cast<Eigen::Index>(model.m)));
    if (u.dim() != model.m) throw ConfigError("field 'simulate.u': input dimension does not match the model");
    const double T = s.positive("T", 1.0);
    EvolveOptions eo;
    eo.tol = integrator_tol(cfg);
    eo.m_max = s.positive("m_max", 1e9);
    if (s.has("samples")) {
        const std::size_t n = s.count("samples");
        for (std::size_t i = 0; i <= n; ++i) eo.output_times.push_back(T * static_cast<double>(i) / static_cast<double>(n));
    }
    const auto tr = evolve(model, x0, u, T, eo);

    CsvTable csv(columns({"t"}, state_columns("x_", model.n), std::vector<std::string>{"norm", "status", "tol"}));
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        csv.row().add(tr.times[i]);
        add_state(csv, tr.states[i]);
        const bool last = i + 1 == tr.times.size();
        csv.add(tr.states[i].norm()).add(std::string(last && tr.blew_up() ? "blowup" : "ok")).add(eo.tol);
    }
    write_atomic(cfg.out_dir / "trajectory.csv", csv.str());
    Json j = header(cfg, "simulate");
    j["model"] = to_json(model);
    j["status"] = tr.blew_up() ? "blowup" : "completed";
    j["t_end"] = tr.t_end;
    if (tr.blew_up()) j["t_esc"] = tr.t_esc;
    j["steps"] = tr.steps;
    j["rejected"] = tr.rejected;
    j["max_norm"] = number_to_json(tr.max_norm());
    j["pads"] = {{"integrator_tol", eo.tol}};
    j["pass"] = true;
    write_atomic(cfg.out_dir / "simulate.json", dump_json(j));
    log << "simulate: " << tr.times.size() << " samples, " << (tr.blew_up() ? "blow-up" : "completed") << "\n";
    return kPass;
}

int cmd_envelope(const ExperimentConfig& cfg, std::ostream& log) {
    const auto model = build_model(cfg);
    const auto fam = build_family(cfg, model);
    Json j = header(cfg, "envelope");
    j["model"] = to_json(model);
    try {
        const auto env = compute_envelope(cfg, model, fam);
        write_atomic(cfg.out_dir / "envelope.csv", envelope_csv(env));
        write_atomic(cfg.out_dir / "envelope.svg", envelope_heatmap_svg(env, "envelope of " + model.name()));
        j["envelope"] = to_json(env);
        j["monotone"] = env.is_monotone();
        j["pass"] = env.is_monotone();
        j["pads"] = {{"integrator_tol", integrator_tol(cfg)}};
        write_atomic(cfg.out_dir / "envelope.json", dump_json(j));
        log << "envelope: " << env.r_grid.size() << " x " << env.t_grid.size() << " table written\n";
        return env.is_monotone() ? kPass : kFail;
    } catch (const NonRfcWitness& w) {
        j["pass"] = false;
        j["blowup"] = witness_json(w);
        write_atomic(cfg.out_dir / "envelope.json", dump_json(j));
        log << "envelope: trajectory blows up at t = " << w.t_esc() << "\n";
        return kFail;
    }
}

int cmd_xi(const ExperimentConfig& cfg, std::ostream& log) {
    const auto model = build_model(cfg);
    const auto fam = build_family(cfg, model);
    const auto xi = build_xi(cfg, model, fam, log);
    Json j = header(cfg, "xi");
    j["xi_form"] = to_json(xi);
    j["xi"] = to_json(xi.xi);
    j["c"] = xi.c;
    bool pass = true;
    const Section s = cfg.section("xi");
    if (s.flag("validate", true)) {
        RfcBoundOptions o;
        o.n_cases = s.count("n_cases", 1000);
        o.seed = cfg.seed;
        o.state_radius = s.positive("state_radius", std::isfinite(xi.r_valid) ? xi.r_valid : 1.0);
        o.t_max = s.positive("t_max", std::isfinite(xi.t_valid) ? xi.t_valid : 1.0);
        o.tol = integrator_tol(cfg);
        o.tol_pad = tol_pad(cfg);
        o.jobs = cfg.jobs;
        const auto rep = rfc_bound_check(model, fam, xi, o);
        pass = rep.pass;
        j["validation"] = {{"pass", rep.pass},
                           {"cases", rep.cases},
                           {"max_violation", rep.max_violation},
                           {"pads", {{"total", rep.pad}, {"integrator", rep.integrator_pad}, {"tol_pad", o.tol_pad}}},
                           {"state_radius", o.state_radius},
                           {"t_max", o.t_max},
                           {"worst_x", to_json(rep.worst_x)},
                           {"worst_t", rep.worst_t},
                           {"worst_member", rep.worst_member}};
        log << "xi: bound check " << (rep.pass ? "pass" : "fail") << " (max violation " << rep.max_violation
            << ", pad " << rep.pad << ")\n";
    }
    j["pass"] = pass;
    write_atomic(cfg.out_dir / "xi.json", dump_json(j));
    return pass ? kPass : kFail;
}

int cmd_construct(const ExperimentConfig& cfg, std::ostream& log) {
    const auto b = construction_for(cfg, log);
    Json j = to_json(*b.c);
    j["subcommand"] = "construct-lyap";
    j["seed"] = cfg.seed;
    j["pass"] = b.c->xi_range_ok;
    write_atomic(cfg.out_dir / "construction.json", dump_json(j));
    if (!b.c->xi_range_ok) log << "construct-lyap: xi table does not cover the working range\n";
    return b.c->xi_range_ok ? kPass : kFail;
}

int cmd_check_lyap(const ExperimentConfig& cfg, std::ostream& log) {
    const auto b = construction_for(cfg, log);
    const auto& c = *b.c;
    const auto& model = b.model;
    const Section s = cfg.section("check_lyap");
    const double a = s.positive("a", 1.0);
    const double pad = s.positive("pad", tol_pad(cfg));
    const double M = c.C2 + pad;

    DissipationOptions dop;
    dop.n_states = s.count("n_states", 500);
    dop.seed = cfg.seed;
    dop.state_radius = s.positive("state_radius", std::max(c.R_work, 1e-9));
    if (s.has("h_seq")) dop.h_seq = s.numbers("h_seq");
    dop.tol = c.tol;
    dop.jobs = cfg.jobs;
    const Evaluator W = [&](const State& x) { return w_eval(c, model, x).value; };
    log << "check-lyap: dissipation at " << dop.n_states << " states\n";
    const auto dis = in_field("check_lyap.h_seq", [&] { return dissipation_check(model, W, c.family, a, M, dop); });

    const std::size_t n_sw = s.count("sandwich_states", 1000);
    const double r_sw = s.positive("sandwich_radius", std::max(c.R_work, 1e-9));
    log << "check-lyap: sandwich at " << n_sw << " states\n";
    const auto sw = sandwich_check(c, model, n_sw, r_sw, derive_seed(cfg.seed, 1), pad, cfg.jobs);

    CsvTable dcsv(columns(state_columns("x_", model.n),
                          std::vector<std::string>{"member", "V", "dini", "bound", "margin", "tol", "converging"}));
    for (const auto& r : dis.records) {
        dcsv.row();
        add_state(dcsv, r.x);
        dcsv.add(r.member).add(r.V).add(r.dini).add(r.bound).add(r.margin).add(r.tol).add(r.converging);
    }
    write_atomic(cfg.out_dir / "dissipation.csv", dcsv.str());
    CsvTable scsv(columns(state_columns("x_", model.n), std::vector<std::string>{"norm", "psi1", "W", "upper", "pad"}));
    for (const auto& r : sw.records) {
        scsv.row();
        add_state(scsv, r.x);
        scsv.add(r.x.norm()).add(r.psi1).add(r.W).add(r.upper).add(sw.pad);
    }
    write_atomic(cfg.out_dir / "sandwich.csv", scsv.str());

    const bool pass = dis.pass && sw.pass;
    Json j = header(cfg, "check-lyap");
    j["pass"] = pass;
    j["construction"] = construction_summary(c);
    j["dissipation"] = {{"pass", dis.pass},
                        {"a", a},
                        {"M", M},
                        {"records", dis.records.size()},
                        {"max_violation", number_to_json(dis.max_violation)},
                        {"max_excess", number_to_json(dis.max_excess)},
                        {"non_converging", dis.non_converging},
                        {"pads", {{"M_pad", pad}, {"dini_tol", "per row, max(1e-4, 10 h_min)(1 + V)"}}}};
    j["sandwich"] = {{"pass", sw.pass},
                     {"states", sw.states},
                     {"radius", r_sw},
                     {"max_lower_violation", number_to_json(sw.max_lower_violation)},
                     {"max_upper_violation", number_to_json(sw.max_upper_violation)},
                     {"pads", {{"upper_pad", sw.pad}}}};
    j["max_violation"] = number_to_json(std::max(dis.max_excess, std::max(sw.max_lower_violation, sw.max_upper_violation)));
    write_atomic(cfg.out_dir / "check_lyap.json", dump_json(j));
    log << "check-lyap: dissipation " << (dis.pass ? "pass" : "fail") << ", sandwich " << (sw.pass ? "pass" : "fail")
        << "\n";
    return pass ? kPass : kFail;
}

struct Certificate {
    std::string v_name;
    Evaluator V;
    MonotoneFn psi1, psi2;
    double C = 0.0, a = 1.0, M = 0.0;
    MonotoneFn gamma = MonotoneFn::identity();
    std::optional<LyapConstruction> c = std::nullopt;
};

// V = norm (psi's from the config) or V = W of a construction.
Certificate certificate_from(const ExperimentConfig& cfg, const Section& s, SystemModel& model, std::ostream& log) {
    const std::string v = s.text("V", std::string("norm"));
    const auto id = MonotoneFn::identity();
    if (v == "norm") {
        Certificate cert{v, [](const State& x) { return x.norm(); }, fn_from(s, "psi1", id), fn_from(s, "psi2", id)};
        cert.C = s.number("C", 0.0);
        cert.a = s.positive("a", 1.0);
        cert.M = s.number("M", 0.0);
        if (cert.C < 0.0 || cert.M < 0.0) throw ConfigError("field '" + s.path() + "': C and M must be >= 0");
        cert.gamma = fn_from(s, "gamma", id);
        return cert;
    }
    if (v == "W") {
        auto b = construction_for(cfg, log);
        model = b.model;
        auto c = std::move(*b.c);
        const double top = std::max(1e3, 10.0 * c.R_work);
        const auto psi1 = MonotoneFn::sample([&](double r) { return psi1_eval(c, r); }, {top, 2048, 1e-6});
        Certificate cert{v, {}, psi1, id, c.C_upper, 1.0, c.C2 + s.positive("pad", tol_pad(cfg))};
        cert.gamma = fn_from(s, "gamma", id);
        cert.c = std::move(c);
        const LyapConstruction* cp = &*cert.c;
        const SystemModel mm = model;
        cert.V = [cp, mm](const State& x) { return w_eval(*cp, mm, x).value; };
        return cert;
    }
    throw ConfigError("field '" + s.field("V") + "': expected \"norm\" or \"W\"");
}

int cmd_rfc_bound(const ExperimentConfig& cfg, std::ostream& log) {
    SystemModel model = build_model(cfg);
    const auto fam = build_family(cfg, model);
    const Section s = cfg.section("rfc_bound");
    const auto cert = certificate_from(cfg, s, model, log);
    const std::size_t n_cases = s.count("n_cases", 1000);
    const double radius = s.positive("state_radius", 1.0);
    const double t_max = s.positive("t_max", 1.0);
    const std::size_t n_curves = s.count("n_curves", 5);
    const double tol = integrator_tol(cfg), pad0 = tol_pad(cfg);
    const auto bound = [&](double r, double t) { return rfc_from_lyapunov(cert.psi1, cert.psi2, cert.C, cert.a, cert.M, r, t); };

    struct Case {
        State x;
        std::size_t member = 0;
        double worst_t = 0.0, worst_norm = 0.0, worst_bound = 0.0, margin = -INFINITY, pad = 0.0;
        bool blew_up = false;
        std::vector<double> t, norm;
    };
    std::vector<Case> cases(n_cases);
    Rng rng(cfg.seed);
    for (auto& c : cases) {
        c.x = random_in_ball(rng, model.n, radius);
        c.member = pick_index(rng, fam.size());
    }
    EvolveOptions eo;
    eo.tol = tol;
    for (std::size_t i = 0; i <= 64; ++i) eo.output_times.push_back(t_max * static_cast<double>(i) / 64.0);
    parallel_for(n_cases, cfg.jobs, [&](std::size_t i) {
        auto& c = cases[i];
        const auto tr = evolve(model, c.x, fam.members()[c.member], t_max, eo);
        c.blew_up = tr.blew_up();
        const double r = c.x.norm();
        for (std::size_t k = 0; k < tr.times.size(); ++k) {
            const double nrm = tr.states[k].norm(), b = bound(r, tr.times[k]);
            const double pad = pad0 + 50.0 * tol * (1.0 + nrm);
            if (nrm - b - pad > c.margin)
                c.margin = nrm - b - pad, c.worst_t = tr.times[k], c.worst_norm = nrm, c.worst_bound = b, c.pad = pad;
            if (i < n_curves) c.t.push_back(tr.times[k]), c.norm.push_back(nrm);
        }
    });

    // tightness along u = 0 from the first sampled state
    double tight_gap = 0.0;
    if (n_cases > 0) {
        const auto tr = evolve(model, cases[0].x, Signal::constant(Vec::Zero(static_cast<Eigen::Index>(model.m))),
                               t_max, eo);
        for (std::size_t k = 0; k < tr.times.size(); ++k)
            tight_gap = std::max(tight_gap, std::abs(bound(cases[0].x.norm(), tr.times[k]) - tr.states[k].norm()));
    }

    std::size_t violations = 0, blowups = 0;
    double max_margin = -INFINITY;
    CsvTable csv({"case", "x_norm", "member", "t", "norm", "bound", "pad", "margin"});
    CsvTable curves({"case", "t", "norm", "bound"});
    std::vector<Curve> plot;
    for (std::size_t i = 0; i < n_cases; ++i) {
        const auto& c = cases[i];
        if (c.blew_up) ++blowups;
        if (c.margin > 0.0) ++violations;
        max_margin = std::max(max_margin, c.margin);
        csv.row().add(i).add(c.x.norm()).add(c.member).add(c.worst_t).add(c.worst_norm).add(c.worst_bound).add(c.pad).add(c.margin);
        if (i < n_curves) {
            Curve sim{c.t, c.norm, false, "#1f77b4"}, bnd{c.t, {}, true, "#d62728"};
            for (std::size_t k = 0; k < c.t.size(); ++k) {
                bnd.y.push_back(bound(c.x.norm(), c.t[k]));
                curves.row().add(i).add(c.t[k]).add(c.norm[k]).add(bnd.y.back());
            }
            plot.push_back(std::move(sim));
            plot.push_back(std::move(bnd));
        }
    }
    write_atomic(cfg.out_dir / "rfc_bound.csv", csv.str());
    write_atomic(cfg.out_dir / "rfc_bound_curves.csv", curves.str());
    write_atomic(cfg.out_dir / "rfc_bound.svg", overlay_svg(plot, "trajectory norms against the Lyapunov bound", "|phi(t)|"));

    bool pass = violations == 0 && blowups == 0;
    Json j = header(cfg, "rfc-bound");
    j["certificate"] = {{"V", cert.v_name}, {"C", cert.C}, {"a", cert.a}, {"M", cert.M}};
    j["cases"] = n_cases;
    j["violations"] = violations;
    j["blowups"] = blowups;
    j["max_violation"] = number_to_json(max_margin);
    j["tightness_gap_u0"] = tight_gap;
    j["pads"] = {{"tol_pad", pad0}, {"integrator", "50 tol (1 + |phi|) per row"}};
    if (s.flag("check_dissipation", true)) {
        DissipationOptions dop;
        dop.n_states = s.count("dissipation_states", 500);
        dop.seed = derive_seed(cfg.seed, 2);
        dop.state_radius = radius;
        dop.jobs = cfg.jobs;
        dop.tol = cert.c ? cert.c->tol : std::min(tol, 1e-10);
        const auto dis = dissipation_check(model, cert.V, fam, cert.a, cert.M, dop);
        pass = pass && dis.pass;
        j["dissipation"] = {{"pass", dis.pass},
                            {"max_violation", number_to_json(dis.max_violation)},
                            {"max_excess", number_to_json(dis.max_excess)},
                            {"records", dis.records.size()}};
    }
    j["pass"] = pass;
    write_atomic(cfg.out_dir / "rfc_bound.json", dump_json(j));
    log << "rfc-bound: " << violations << " violations in " << n_cases << " cases, max margin " << max_margin << "\n";
    return pass ? kPass : kFail;
}

Json violation_json(const BrsViolation& v) {
    return {{"kind", to_string(v.kind)}, {"x", to_json(v.x)}, {"u", to_json(v.u)},
            {"t", v.t},                  {"value", v.value},  {"bound", v.bound}};
}

int cmd_brs(const ExperimentConfig& cfg, std::ostream& log) {
    SystemModel model = build_model(cfg);
    const auto fam = build_family(cfg, model);
    const Section s = cfg.section("brs");
    const auto cert = certificate_from(cfg, s, model, log);
    BrsCertificate bc{cert.v_name, cert.V, cert.psi1, cert.psi2, cert.C, cert.a, cert.gamma};
    BrsOptions bo;
    bo.n_cases = s.count("n_cases", 500);
    bo.tau = s.positive("tau", 5.0);
    bo.seed = cfg.seed;
    bo.state_radius = s.positive("state_radius", 1.0);
    bo.tol = std::min(integrator_tol(cfg), 1e-10);
    bo.tol_pad = tol_pad(cfg);
    if (s.has("h_seq")) bo.h_seq = s.numbers("h_seq");
    bo.jobs = cfg.jobs;
    if (s.has("probes")) {
        const Json& pj = s.raw("probes");
        if (!pj.is_array()) throw ConfigError("field 'brs.probes': expected an array");
        for (std::size_t i = 0; i < pj.size(); ++i) {
            const Section p(&pj[i], "brs.probes[" + std::to_string(i) + "]");
            bo.probes.emplace_back(vec_field(p, "x", model.n),
                                   in_field(p.field("u"), [&] { return signal_from_json(p.raw("u")); }));
        }
    }
    const auto rep = in_field("brs", [&] { return brs_check(model, bc, fam, bo); });

    CsvTable csv(columns(state_columns("x_", model.n),
                         std::vector<std::string>{"u_norm", "gate_active", "dini", "gate_bound", "gate_tol",
                                                  "gate_margin", "trajectory_bound", "max_norm", "trajectory_margin",
                                                  "trajectory_pad", "blew_up", "t_esc"}));
    for (const auto& r : rep.records) {
        csv.row();
        add_state(csv, r.x);
        csv.add(r.u_norm).add(r.gate_active).add(r.dini).add(r.gate_bound).add(r.gate_tol).add(r.gate_margin);
        csv.add(r.trajectory_bound).add(r.max_norm).add(r.trajectory_margin);
        csv.add(bo.tol_pad + 50.0 * bo.tol * (1.0 + r.max_norm)).add(r.blew_up).add(r.t_esc);
    }
    write_atomic(cfg.out_dir / "brs.csv", csv.str());
    Json j = header(cfg, "brs");
    j["pass"] = rep.pass;
    j["cases"] = rep.cases;
    j["gate_active"] = rep.gate_active;
    j["gate_pass"] = rep.gate_pass;
    j["trajectory_pass"] = rep.trajectory_pass;
    j["bic_contradiction"] = rep.bic_contradiction;
    j["max_gate_margin"] = number_to_json(rep.max_gate_margin);
    j["max_trajectory_margin"] = number_to_json(rep.max_trajectory_margin);
    j["max_violation"] = number_to_json(std::max(rep.max_gate_margin, rep.max_trajectory_margin));
    j["pads"] = {{"tol_pad", bo.tol_pad}, {"integrator_tol", bo.tol}, {"dini_tol", "per row"}};
    j["first_violation"] = rep.first_violation ? violation_json(*rep.first_violation) : Json();
    write_atomic(cfg.out_dir / "brs.json", dump_json(j));
    log << "brs: " << (rep.pass ? "pass" : "fail");
    if (rep.first_violation)
        log << " (" << to_string(rep.first_violation->kind) << " violation, value " << rep.first_violation->value
            << " against " << rep.first_violation->bound << ")";
    log << "\n";
    return rep.pass ? kPass : kFail;
}

int cmd_closure(const ExperimentConfig& cfg, std::ostream& log) {
    const auto model = build_model(cfg);
    const auto fam = build_family(cfg, model);
    const Section s = cfg.section("closure");
    const std::string norm = s.text("norm", std::string("sup"));
    NormKind kind;
    if (norm == "sup")
        kind = NormKind::Sup;
    else if (norm == "lp")
        kind = NormKind::Lp;
    else
        throw ConfigError("field 'closure.norm': expected \"sup\" or \"lp\"");
    const double p = s.positive("p", 1.0);
    const auto rep = in_field("closure", [&] { return closure_check(fam, kind, p); });
    Json j = header(cfg, "closure");
    j["closed"] = rep.closed;
    j["pass"] = rep.closed;
    j["norm"] = norm;
    if (kind == NormKind::Lp) j["p"] = p;
    j["R"] = number_to_json(rep.R);
    j["pairs_checked"] = rep.pairs_checked;
    j["max_concat_norm"] = number_to_json(rep.max_concat_norm);
    j["pads"] = {{"radius_rel_tol", 1e-12}};
    j["witness"] = rep.witness ? Json{{"u1", to_json(rep.witness->u1)},
                                      {"u2", to_json(rep.witness->u2)},
                                      {"t", rep.witness->t},
                                      {"norm", rep.witness->norm}}
                               : Json();
    write_atomic(cfg.out_dir / "closure.json", dump_json(j));
    log << "closure: " << (rep.closed ? "closed" : "not closed");
    if (rep.witness) log << " (witness norm " << rep.witness->norm << " > R = " << rep.R << ")";
    log << "\n";
    return rep.closed ? kPass : kFail;
}

int cmd_diverge(const ExperimentConfig& cfg, std::ostream& log) {
    const auto model = build_model(cfg);
    const Section s = cfg.section("diverge");
    const auto Rs = s.numbers("R", std::vector<double>{1.0, 2.0, 4.0});
    for (double R : Rs)
        if (!(R >= 0.0) || !std::isfinite(R)) throw ConfigError("field 'diverge.R': radii must be finite and >= 0");
    const double t = s.positive("t", 1.0);
    const State x0 = s.has("x0") ? vec_field(s, "x0", model.n) : State::Ones(static_cast<Eigen::Index>(model.n));
    DivergenceOptions o;
    o.delta = s.positive("delta", 0.5);
    o.lattice_size = s.count("lattice", 3);
    o.n_random = s.count("N", 10);
    o.horizon = s.positive("horizon", 2.0);
    o.seed = cfg.seed;
    o.n_sphere = s.count("n_sphere", 8);
    o.tol = integrator_tol(cfg);
    o.jobs = cfg.jobs;
    const auto pts = in_field("diverge", [&] { return divergence_probe(model, Rs, t, x0, o); });
    CsvTable csv({"R", "value", "blew_up", "t_esc", "tol"});
    Json rows = Json::array();
    for (const auto& p : pts) {
        const double pad = 50.0 * o.tol * (1.0 + (std::isfinite(p.value) ? p.value : 0.0));
        csv.row().add(p.R).add(p.value).add(p.blew_up).add(p.t_esc).add(pad);
        rows.push_back({{"R", p.R}, {"value", number_to_json(p.value)}, {"blew_up", p.blew_up}, {"t_esc", p.t_esc}, {"tol", pad}});
    }
    write_atomic(cfg.out_dir / "diverge.csv", csv.str());
    Json j = header(cfg, "diverge");
    j["model"] = to_json(model);
    j["t"] = t;
    j["x0"] = to_json(x0);
    j["points"] = rows;
    j["pass"] = true;
    write_atomic(cfg.out_dir / "diverge.json", dump_json(j));
    log << "diverge: " << pts.size() << " radii probed\n";
    return kPass;
}

using Command = int (*)(const ExperimentConfig&, std::ostream&);

const std::map<std::string, Command>& commands() {
    static const std::map<std::string, Command> m = {
        {"axioms", cmd_axioms},         {"simulate", cmd_simulate},     {"envelope", cmd_envelope},
        {"xi", cmd_xi},                 {"construct-lyap", cmd_construct}, {"check-lyap", cmd_check_lyap},
        {"rfc-bound", cmd_rfc_bound},   {"brs", cmd_brs},               {"closure", cmd_closure},
        {"diverge", cmd_diverge}};
    return m;
}

}  // namespace

const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names = {"axioms", "simulate", "envelope",  "xi",      "construct-lyap",
                                                   "check-lyap", "rfc-bound", "brs", "closure", "diverge"};
    return names;
}

int run(const std::string& subcommand, const ExperimentConfig& cfg, std::ostream& log) {
    const auto it = commands().find(subcommand);
    if (it == commands().end()) throw ConfigError("unknown subcommand '" + subcommand + "'");
    fs::create_directories(cfg.out_dir);
    return it->second(cfg, log);
}

int main_entry(int argc, char** argv) {
    CLI::App app{"Numerical certificates for robust forward completeness"};
    app.require_subcommand(1, 1);
    std::string config;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> jobs;
    for (const auto& name : subcommands()) {
        auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
        sub->add_option("--config", config, "JSON experiment config")->required();
        sub->add_option("--out", out, "output directory (overrides output_dir)");
        sub->add_option("--seed", seed, "seed override");
        sub->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kPass : kConfigError;
    }
    const std::string sub = app.get_subcommands().front()->get_name();
    try {
        Overrides ov;
        if (out) ov.out = fs::path(*out);
        ov.seed = seed;
        ov.jobs = jobs;
        const auto cfg = load_config(config, ov);
        return run(sub, cfg, std::cerr);
    } catch (const ConfigError& e) {
        std::cerr << "rfc-cert: config error in " << config << ": " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "rfc-cert: " << sub << " failed: " << e.what() << "\n";
        return kRuntimeError;
    }
}

}  // namespace rfc::cli
