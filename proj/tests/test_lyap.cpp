#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include <unsupported/Eigen/MatrixFunctions>

#include "rfc/errors.hpp"
#include "rfc/lyap.hpp"
#include "rfc/sampling.hpp"
#include "test_oracles.hpp"

using namespace rfc;

namespace {

SystemModel decay() {
    Eigen::MatrixXd A(1, 1), B(1, 1);
    A << -1.0;
    B << 0.0;
    auto m = SystemModel::linear(A, B);
    m.lip_bound = catalog_lip_bound(m, 1.0);
    return m;
}

SystemModel rfc_model() {
    auto m = SystemModel::scalar_rfc();
    m.lip_bound = catalog_lip_bound(m, 1.0);
    return m;
}

XiForm identity_xi() { return {MonotoneFn::identity(), 0.0}; }

// zeta(r) = mu(r, r) + r for mu = r e^t, tabulated finely.
XiForm rfc_xi() {
    return {MonotoneFn::sample([](double s) { return s * std::exp(s) + s; }, {20.0, 4096, 1e-6}), 0.0};
}

Evaluator norm_v() {
    return [](const State& x) { return x.norm(); };
}

State s1(double x) { return State::Constant(1, x); }

// y' = a y + M solved through the matrix exponential of the augmented system.
double linear_ode_oracle(double y0, double a, double M, double t) {
    Eigen::Matrix2d A;
    A << a, M, 0.0, 0.0;
    const Eigen::Matrix2d E = (A * t).exp();
    return E(0, 0) * y0 + E(0, 1);
}

}  // namespace

TEST_CASE("horizon") {
    const auto xi = identity_xi();
    CHECK(horizon(1.0, 1, xi) == 0.0);
    const double t12 = horizon(1.0, 2, xi);
    CHECK(t12 >= 1.65);
    CHECK(t12 <= 1.70);
    CHECK(t12 == doctest::Approx(oracle::horizon_root(1.0, 0.5)).epsilon(1e-8));
    const double t21 = horizon(2.0, 1, xi);
    CHECK(t21 >= 1.0);
    CHECK(t21 <= 1.2);
    CHECK(t21 == doctest::Approx(oracle::horizon_root(2.0, 1.0)).epsilon(1e-8));
    // R = 0 uses the same formula
    CHECK(horizon(0.0, 1, xi) == 0.0);
    CHECK(horizon(0.0, 4, xi) == doctest::Approx(oracle::horizon_root(0.0, 0.25)).epsilon(1e-8));
    CHECK_THROWS_AS(horizon(1.0, 0, xi), DomainError);
}

TEST_CASE("construction on a contraction") {
    const auto model = decay();
    const auto fam = sample_family({1.0, 0.5, 3, 4, 2.0, 1, 1});
    const XiForm xi{MonotoneFn::linear(2.0), 0.0};
    LyapOptions lo;
    lo.R_work = 2.0;
    lo.t_points = 64;
    const auto c = build_construction(model, fam, xi, lo);
    CHECK(c.K >= 20);
    for (Eigen::Index R = 0; R < c.M_table.rows(); ++R)
        for (Eigen::Index k = 0; k < c.M_table.cols(); ++k) CHECK(c.M_table(R, k) == doctest::Approx(1.0 / 3.0));
    CHECK(c.C_upper == doctest::Approx(std::exp(-1.0)));

    // rho(s) = s / 2, so V_k(x) = G_k(|x| / 6) attained at t = 0.
    Rng rng(1);
    for (int i = 0; i < 40; ++i) {
        const double x = uniform(rng, -2.0, 2.0);
        const auto prof = vk_all(c, model, s1(x));
        for (int k = 1; k <= c.K; ++k) {
            CHECK(prof.V[k - 1] == doctest::Approx(gk_eval(k, std::abs(x) / 6.0)).epsilon(1e-9));
            if (k > 1) CHECK(prof.V[k - 1] >= prof.V[k - 2]);
        }
        CHECK(vk_eval(c, model, 3, s1(x)) == prof.V[2]);
    }
    CHECK(w_eval(c, model, s1(0.0)).value == 0.0);
    CHECK(vk_eval(c, model, 1, s1(0.0)) == 0.0);
}

TEST_CASE("M table on scalar_rfc follows the Gronwall bound") {
    const auto model = rfc_model();
    const auto fam = sample_family({1.0, 0.5, 3, 4, 2.0, 1, 1});
    LyapOptions lo;
    lo.R_work = 1.0;
    lo.t_points = 32;
    lo.K = 8;
    const auto c = build_construction(model, fam, identity_xi(), lo);
    const double m12 = c.M(1, 2);
    CHECK(m12 >= std::exp(1.65) / 3.0);
    CHECK(m12 <= std::exp(1.70) / 3.0);
    CHECK(m12 == doctest::Approx(std::exp(c.T(1, 2)) / 3.0).epsilon(1e-9));
    for (std::size_t R = 0; R <= c.R_max; ++R)
        for (int k = 1; k <= c.K; ++k) {
            if (R > 0) CHECK(c.M(R, k) >= c.M(R - 1, k));
            if (k > 1) CHECK(c.M(R, k) >= c.M(R, k - 1));
        }
}

TEST_CASE("W sandwich, truncation and psi1 on scalar_rfc") {
    const auto model = rfc_model();
    const auto fam = sample_family({1.0, 0.5, 3, 4, 2.0, 3, 1});
    LyapOptions lo;
    lo.R_work = 3.0;
    lo.t_points = 128;
    lo.K = 27;
    const auto c = build_construction(model, fam, rfc_xi(), lo);
    CHECK(c.xi_range_ok);
    CHECK(c.C2 <= std::log(2.0));
    const int K0 = c.K - 5;
    Rng rng(2);
    for (int i = 0; i < 60; ++i) {
        const State x = s1(uniform(rng, -3.0, 3.0));
        const double n = x.norm();
        const auto w = w_eval(c, model, x, K0);
        const auto wf = w_eval(c, model, x);
        CHECK(psi1_eval(c, n, K0) <= w.value + 1e-15);
        CHECK(w.value <= n + c.C_upper + 1e-6);
        CHECK(std::abs(wf.value - w.value) <= w.tail);
    }
    for (int i = 0; i < 1000; ++i) {
        const double r = uniform(rng, 0.0, 10.0), s = uniform(rng, 0.0, 10.0);
        CHECK(std::abs(psi1_eval(c, r) - psi1_eval(c, s)) <= std::abs(r - s) / 3.0 * (1 + 1e-12) + 1e-15);
    }
    CHECK(psi1_eval(c, 0.0) == 0.0);
}

TEST_CASE("growth estimate and V_k Lipschitz bound on scalar_rfc") {
    const auto model = rfc_model();
    const auto fam = sample_family({1.0, 0.5, 3, 4, 2.0, 3, 1});
    LyapOptions lo;
    lo.R_work = 2.0;
    lo.t_points = 256;
    lo.K = 8;
    const auto c = build_construction(model, fam, rfc_xi(), lo);
    Rng rng(5);
    for (int i = 0; i < 10; ++i) {
        const State x = s1(uniform(rng, -2.0, 2.0));
        const auto& v = fam.members()[pick_index(rng, fam.size())];
        for (double h : {0.01, 0.05, 0.1})
            for (const auto& g : growth_check(c, model, x, v, h, {1, 2, 4, 8})) {
                CHECK(g.pass);
                CHECK(g.family_gap >= 0.0);
            }
    }
    for (int i = 0; i < 30; ++i) {
        const State x = s1(uniform(rng, -2.0, 2.0)), y = s1(uniform(rng, -2.0, 2.0));
        const auto px = vk_all(c, model, x), py = vk_all(c, model, y);
        for (int k = 1; k <= c.K; ++k)
            CHECK(std::abs(px.V[k - 1] - py.V[k - 1]) <=
                  c.M(2, k) * (x - y).norm() + 2.0 * std::max(px.time_pad, py.time_pad) + 1e-9);
    }
}

TEST_CASE("sup over finite families") {
    Rng rng(8);
    for (int i = 0; i < 10000; ++i) {
        const std::size_t n = 1 + pick_index(rng, 12);
        std::vector<double> f(n), g(n), d(n);
        for (std::size_t j = 0; j < n; ++j) {
            f[j] = uniform(rng, -5, 5);
            g[j] = uniform(rng, -5, 5);
            d[j] = f[j] - g[j];
        }
        CHECK(*std::max_element(f.begin(), f.end()) - *std::max_element(g.begin(), g.end()) <=
              *std::max_element(d.begin(), d.end()));
    }
}

TEST_CASE("dini_estimate") {
    const auto V = norm_v();
    const double tol = 10.0 * 1e-5;
    CHECK(dini_estimate(decay(), V, s1(1.0), Signal::constant(0.0)).value == doctest::Approx(-1.0).epsilon(tol));
    CHECK(std::abs(dini_estimate(SystemModel::scalar_rfc(), V, s1(2.0), Signal::constant(1.0)).value - 1.0) <= tol);
    CHECK(std::abs(dini_estimate(decay(), V, s1(0.0), Signal::constant(0.0)).value) <= tol);
    const auto d = dini_estimate(decay(), V, s1(1.0), Signal::constant(0.0));
    CHECK(d.converging);
    CHECK(d.quotients.size() == default_h_seq().size());
    CHECK_THROWS_AS(dini_estimate(SystemModel::quadratic(), V, s1(1000.0), Signal::constant(0.0)),
                    MaximalIntervalError);
    CHECK_THROWS_AS(dini_estimate(decay(), V, s1(1.0), Signal::constant(0.0), {1e-3, 1e-2}), ContractError);
}

TEST_CASE("dissipation_check with V = |x|") {
    const auto fam = sample_family({1.0, 0.5, 3, 10, 2.0, 4, 1});
    DissipationOptions o;
    o.n_states = 200;
    o.state_radius = 3.0;
    auto rep = dissipation_check(SystemModel::scalar_rfc(), norm_v(), fam, 1.0, 0.0, o);
    CHECK(rep.pass);
    CHECK(rep.records.size() == 200);

    rep = dissipation_check(SystemModel::scalar_rfc(), norm_v(), fam, 0.0, 0.0, o);
    CHECK_FALSE(rep.pass);
    CHECK(rep.max_violation > 0.0);
}

TEST_CASE("dissipation of the constructed W on scalar_rfc") {
    const auto model = rfc_model();
    const auto fam = sample_family({1.0, 0.5, 3, 4, 2.0, 3, 1});
    LyapOptions lo;
    lo.R_work = 2.0;
    lo.t_points = 128;
    const auto c = build_construction(model, fam, rfc_xi(), lo);
    const Evaluator W = [&](const State& x) { return w_eval(c, model, x).value; };
    DissipationOptions o;
    o.n_states = 20;
    o.state_radius = 2.0;
    const auto rep = dissipation_check(model, W, fam, 1.0, c.C2, o);
    CHECK(rep.pass);
}

TEST_CASE("comparison_bound") {
    CHECK(comparison_bound(1, 1, 1, std::log(2.0)) == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(comparison_bound(0, 2, 4, 0) == 0.0);
    CHECK(comparison_bound(1, 1, 0, 1) == doctest::Approx(std::exp(1.0)).epsilon(1e-15));
    CHECK_THROWS_AS(comparison_bound(1, 0, 1, 1), DomainError);
    CHECK_THROWS_AS(comparison_bound(1, -1, 1, 1), DomainError);

    Rng rng(9);
    for (int i = 0; i < 1000; ++i) {
        const double y0 = uniform(rng, 0, 5), a = uniform(rng, 0.01, 2), M = uniform(rng, 0, 3), t = uniform(rng, 0, 3);
        const double b = comparison_bound(y0, a, M, t);
        CHECK(std::abs(b - linear_ode_oracle(y0, a, M, t)) <= 1e-12 * b);
    }
}

TEST_CASE("rfc_from_lyapunov") {
    const auto id = MonotoneFn::identity();
    for (double r : {0.0, 0.5, 2.0})
        for (double t : {0.0, 1.0, 3.0}) CHECK(rfc_from_lyapunov(id, id, 0.0, 1.0, 0.0, r, t) == doctest::Approx(r * std::exp(t)));
    CHECK(rfc_from_lyapunov(id, id, 0.0, 1.0, 1.0, 1.0, std::log(2.0)) == doctest::Approx(3.0));

    // V = |x| on scalar_rfc: the bound dominates simulated norms and is tight at u = 0.
    const auto fam = sample_family({1.0, 0.5, 3, 10, 2.0, 6, 1});
    Rng rng(10);
    for (int i = 0; i < 200; ++i) {
        const double x0 = uniform(rng, -3.0, 3.0);
        const auto& u = fam.members()[pick_index(rng, fam.size())];
        const double t = uniform(rng, 0.0, 2.0);
        const double nrm = t == 0.0 ? std::abs(x0) : std::abs(flow_at(SystemModel::scalar_rfc(), s1(x0), u, t)[0]);
        CHECK(nrm <= rfc_from_lyapunov(id, id, 0.0, 1.0, 0.0, std::abs(x0), t) + 1e-6);
    }
    const double tight = std::abs(flow_at(SystemModel::scalar_rfc(), s1(1.5), Signal::constant(0.0), 2.0)[0]);
    CHECK(std::abs(tight - rfc_from_lyapunov(id, id, 0.0, 1.0, 0.0, 1.5, 2.0)) <= 1e-6);
}

TEST_CASE("brs_check on decay_plus_input") {
    const auto model = SystemModel::decay_plus_input();
    const auto fam = sample_family({1.0, 0.5, 5, 20, 2.0, 3, 1});
    const auto id = MonotoneFn::identity();
    BrsCertificate cert{"norm", norm_v(), id, id, 0.0, 1.0, id};
    BrsOptions o;
    o.n_cases = 100;
    o.state_radius = 2.0;
    auto rep = brs_check(model, cert, fam, o);
    CHECK(rep.pass);
    CHECK(rep.gate_active > 0);
    CHECK_FALSE(rep.first_violation);

    cert.gamma = MonotoneFn::linear(0.1);
    o.probes = {{s1(0.2), Signal::constant(1.0)}};
    rep = brs_check(model, cert, fam, o);
    CHECK_FALSE(rep.pass);
    CHECK_FALSE(rep.gate_pass);
    REQUIRE(rep.first_violation);
    CHECK(rep.first_violation->kind == BrsViolationKind::Gate);
    CHECK(rep.first_violation->x[0] == 0.2);
    CHECK(rep.first_violation->value == doctest::Approx(0.8).epsilon(1e-4));
    CHECK(rep.first_violation->bound == doctest::Approx(0.2));

    // quadratic growth contradicts BIC
    rep = brs_check(SystemModel::quadratic(), cert, fam, {10, 5.0, 0, 2.0});
    CHECK(rep.bic_contradiction);
    CHECK_FALSE(rep.pass);
}
