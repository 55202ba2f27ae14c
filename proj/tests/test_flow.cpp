#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <thread>

#include "rfc/errors.hpp"
#include "rfc/flow.hpp"
#include "rfc/sampling.hpp"

using namespace rfc;

namespace {

State s1(double x) { return State::Constant(1, x); }

const double kTol = 1e-9;

}  // namespace

TEST_CASE("evolve reproduces exact scalar solutions") {
    const auto rfc_model = SystemModel::scalar_rfc();
    auto tr = evolve(rfc_model, s1(1.0), Signal::constant(0.0), 1.0, {kTol});
    CHECK(tr.status == FlowStatus::Completed);
    CHECK(tr.final_state()[0] == doctest::Approx(std::exp(1.0)).epsilon(1e-8));

    const auto xu = SystemModel::scalar_xu();
    tr = evolve(xu, s1(1.0), Signal::constant(2.0), 1.0, {kTol});
    CHECK(tr.final_state()[0] == doctest::Approx(std::exp(2.0)).epsilon(1e-8));
}

TEST_CASE("quadratic blows up just before t = 1/x0") {
    const auto q = SystemModel::quadratic();
    const auto tr = evolve(q, s1(1.0), Signal::constant(0.0), 2.0, {kTol});
    REQUIRE(tr.blew_up());
    CHECK(tr.t_esc < 1.0 + 1e-6);
    CHECK(tr.t_esc > 0.99);
    CHECK(tr.final_state().norm() > tr.m_exceeded);
    CHECK_THROWS_AS(flow_at(q, s1(1.0), Signal::constant(0.0), 1.5), MaximalIntervalError);
}

TEST_CASE("quadratic blow-up is reported for every x0 >= 0.1 past 1/x0") {
    const auto q = SystemModel::quadratic();
    for (double x0 : {0.1, 0.25, 0.5, 1.0, 3.0, 10.0}) {
        const auto tr = evolve(q, s1(x0), Signal::constant(0.0), 1.0 / x0 + 0.5, {kTol});
        CHECK(tr.blew_up());
        CHECK(tr.t_esc == doctest::Approx(1.0 / x0).epsilon(1e-3));
    }
}

TEST_CASE("flow_at") {
    const auto xu = SystemModel::scalar_xu();
    const State x0 = s1(0.37);
    CHECK(flow_at(xu, x0, Signal::constant(1.0), 0.0) == x0);

    Eigen::MatrixXd A(1, 1), B(1, 1);
    A << -1.0;
    B << 0.0;
    const auto lin = SystemModel::linear(A, B);
    CHECK(flow_at(lin, s1(2.0), Signal::constant(0.0), std::log(2.0))[0] == doctest::Approx(1.0).epsilon(1e-8));

    CHECK(flow_at(SystemModel::scalar_rfc(), s1(1.0), Signal::constant(1.0), 2.0)[0] ==
          doctest::Approx(std::exp(1.0)).epsilon(1e-8));
}

TEST_CASE("switch times are integration breakpoints") {
    // x' = x u with u = 1 on [0, 0.3), -2 on [0.3, 1.1), 0.5 afterwards.
    const Signal u({0.3, 1.1}, {Vec::Constant(1, 1.0), Vec::Constant(1, -2.0)}, Vec::Constant(1, 0.5));
    const double expected = std::exp(0.3 - 2.0 * 0.8 + 0.5 * 0.4);
    CHECK(flow_at(SystemModel::scalar_xu(), s1(1.0), u, 1.5)[0] == doctest::Approx(expected).epsilon(1e-8));
}

TEST_CASE("dense output matches the exact solution between nodes") {
    EvolveOptions opts;
    opts.tol = 1e-10;
    for (int i = 1; i <= 200; ++i) opts.output_times.push_back(0.025 * i);
    const auto tr = evolve(SystemModel::scalar_rfc(), s1(1.0), Signal::constant(0.0), 5.0, opts);
    double worst = 0.0;
    for (std::size_t i = 0; i < tr.times.size(); ++i)
        worst = std::max(worst, std::abs(tr.states[i][0] / std::exp(tr.times[i]) - 1.0));
    CHECK(worst < 1e-8);
}

TEST_CASE("non-finite field is a model error") {
    Eigen::MatrixXd A(1, 1), B(1, 1);
    A << NAN;
    B << 0.0;
    CHECK_THROWS_AS(evolve(SystemModel::linear(A, B), s1(1.0), Signal::constant(0.0), 1.0), ModelError);
}

TEST_CASE("evolve is deterministic across threads") {
    const auto fam = sample_family({1.0, 0.5, 3, 6, 2.0, 9, 1});
    const auto model = SystemModel::scalar_xu();
    std::vector<std::vector<double>> a(fam.size()), b(fam.size());
    for (std::size_t i = 0; i < fam.size(); ++i) a[i] = evolve(model, s1(0.7), fam.members()[i], 2.0).times;
    {
        std::vector<std::jthread> pool;
        for (std::size_t i = 0; i < fam.size(); ++i)
            pool.emplace_back([&, i] { b[i] = evolve(model, s1(0.7), fam.members()[i], 2.0).times; });
    }
    for (std::size_t i = 0; i < fam.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("scalar_rfc trajectories obey |x| e^t") {
    const auto fam = sample_family({1.0, 0.25, 5, 20, 3.0, 2, 1});
    Rng rng(4);
    const auto model = SystemModel::scalar_rfc();
    for (int c = 0; c < 50; ++c) {
        const double x0 = uniform(rng, -3.0, 3.0);
        const auto& u = fam.members()[pick_index(rng, fam.size())];
        const auto tr = evolve(model, s1(x0), u, 3.0);
        for (std::size_t i = 0; i < tr.times.size(); ++i)
            CHECK(std::abs(tr.states[i][0]) <= std::abs(x0) * std::exp(tr.times[i]) * (1 + 1e-8) + 1e-12);
    }
}

TEST_CASE("axiom residuals on scalar_rfc") {
    const auto fam = sample_family({1.0, 0.25, 5, 10, 2.0, 1, 1});
    AxiomOptions opts;
    opts.tol = 1e-8;
    opts.seed = 3;
    const auto rep = check_axioms(SystemModel::scalar_rfc(), fam, opts);
    CHECK(rep.identity == 0.0);
    CHECK(rep.causality <= rep.axiom_tol);
    CHECK(rep.cocycle <= rep.axiom_tol);
    CHECK(rep.continuity <= rep.axiom_tol);
    CHECK(rep.pass);
    CHECK(rep.cases == 100);
}

TEST_CASE("lipschitz_estimate") {
    const auto fam = sample_family({1.0, 0.5, 3, 6, 2.0, 1, 1});
    for (double a : {0.5, 1.3}) {
        Eigen::MatrixXd A = a * Eigen::MatrixXd::Identity(2, 2);
        Eigen::MatrixXd B = Eigen::MatrixXd::Zero(2, 1);
        auto lin = SystemModel::linear(A, B);
        auto est = lipschitz_estimate(lin, 1.5, 2.0, fam, {});
        CHECK(est.empirical == doctest::Approx(std::exp(a * 1.5)).epsilon(1e-6));
        lin.lip_bound = catalog_lip_bound(lin, 1.0);
        est = lipschitz_estimate(lin, 1.5, 2.0, fam, {});
        REQUIRE(est.certified);
        CHECK(*est.certified == doctest::Approx(std::exp(a * 1.5)).epsilon(1e-9));
    }

    auto rfc_model = SystemModel::scalar_rfc();
    rfc_model.lip_bound = catalog_lip_bound(rfc_model, 1.0);
    const auto est = lipschitz_estimate(rfc_model, 1.0, 1.0, fam, {});
    CHECK(est.empirical <= std::exp(1.0) * (1 + 1e-8));
    CHECK(est.value() == doctest::Approx(std::exp(1.0)));

    auto xu = SystemModel::scalar_xu();
    xu.lip_bound = catalog_lip_bound(xu, 1.0);
    CHECK(lipschitz_estimate(xu, 1.0, 1.0, fam, {}).value() == doctest::Approx(std::exp(1.0)));

    Eigen::MatrixXd A(1, 1), B(1, 1);
    A << -1.0;
    B << 0.0;
    auto decay = SystemModel::linear(A, B);
    CHECK(lipschitz_estimate(decay, 2.0, 1.0, fam, {}).empirical == doctest::Approx(1.0));
    decay.lip_bound = catalog_lip_bound(decay, 1.0);
    CHECK(*lipschitz_estimate(decay, 2.0, 1.0, fam, {}).certified == doctest::Approx(1.0).epsilon(1e-10));

    const auto q = SystemModel::quadratic();
    CHECK_THROWS_AS(lipschitz_estimate(q, 5.0, 1.0, fam, {}), NonRfcWitness);
}
