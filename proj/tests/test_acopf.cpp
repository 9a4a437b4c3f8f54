#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "diffopf/acopf.hpp"
#include "diffopf/errors.hpp"
#include "diffopf/rng.hpp"
#include "test_support.hpp"

using namespace diffopf;
using acopf::BusLoad;
using acopf::PowerFlowState;

namespace {

// Two buses joined by one line with admittance given directly.
grid::Network two_bus(double g, double b, grid::FlowModel model) {
    grid::Network net;
    net.base_mva = 100.0;
    net.flow_model = model;
    net.buses = {{1, 0.9, 1.1, 0.0, 0.0, true}, {2, 0.9, 1.1, 0.0, 0.0, false}};
    net.lines = {{1, 2, g, b, 0.0, 10.0}};
    net.nominal_load = {{0.0, 0.0}, {0.0, 0.0}};
    net.validate();
    return net;
}

BusLoad zero_load(const grid::Network& net) {
    return {Eigen::VectorXd::Zero(net.n_buses()), Eigen::VectorXd::Zero(net.n_buses())};
}

}  // namespace

TEST_CASE("paper-model flows at flat start") {
    const auto net = two_bus(0.9901, -9.901, grid::FlowModel::paper);
    const auto state = acopf::flat_state(net);
    const auto f = acopf::line_flows(net, state);
    CHECK(f.p_from[0] == doctest::Approx(0.9901).epsilon(1e-12));
    CHECK(f.q_from[0] == doctest::Approx(9.901).epsilon(1e-12));
    CHECK(f.p_to[0] == doctest::Approx(0.9901).epsilon(1e-12));
    CHECK(f.q_to[0] == doctest::Approx(9.901).epsilon(1e-12));
}

TEST_CASE("pi-model lossless line carries nothing at flat start") {
    const auto net = two_bus(0.0, -10.0, grid::FlowModel::pi);
    const auto state = acopf::flat_state(net);
    const auto f = acopf::line_flows(net, state);
    CHECK(f.p_from[0] == doctest::Approx(0.0));
    CHECK(f.p_to[0] == doctest::Approx(0.0));
}

TEST_CASE("paper-model flow under an angle difference") {
    const auto net = two_bus(0.0, -10.0, grid::FlowModel::paper);
    auto state = acopf::flat_state(net);
    state.theta[0] = 0.1;  // theta_i - theta_j = 0.1
    const auto f = acopf::line_flows(net, state);
    CHECK(f.p_from[0] == doctest::Approx(-10.0 * std::sin(0.1)).epsilon(1e-12));
    CHECK(f.p_from[0] == doctest::Approx(-0.9983).epsilon(1e-3));
}

TEST_CASE("isolated bus with nothing attached balances to zero") {
    grid::Network net;
    net.buses = {{1, 0.9, 1.1, 0.0, 0.0, true}};
    net.nominal_load = {{0.0, 0.0}};
    net.validate();
    const auto r = acopf::power_balance_residual(net, acopf::flat_state(net), zero_load(net));
    CHECK(r.dp[0] == 0.0);
    CHECK(r.dq[0] == 0.0);
}

TEST_CASE("demand shows up as a negative residual") {
    auto net = testsup::load_named_case("case2.json");
    BusLoad load = zero_load(net);
    load.p[1] = 0.5;
    auto state = acopf::flat_state(net);
    state.p_g.setZero();
    state.q_g.setZero();
    const auto r = acopf::power_balance_residual(net, state, load);
    CHECK(r.dp[1] == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("generator columns of the jacobian are unit entries") {
    const auto net = testsup::load_named_case("case5_pjm.json");
    const auto state = acopf::flat_state(net);
    const auto jac = acopf::residual_jacobian(net, state);
    const acopf::detail::VarMap m{net.n_buses(), net.n_gens()};
    for (int g = 0; g < net.n_gens(); ++g) {
        const int b = net.bus_index(net.generators[static_cast<std::size_t>(g)].bus);
        CHECK(jac.coeff(b, m.pg(g)) == 1.0);
        CHECK(jac.coeff(net.n_buses() + b, m.qg(g)) == 1.0);
    }
}

TEST_CASE("paper-model flow angle derivative at flat start equals b") {
    const auto d =
        acopf::detail::flow_deriv(0.0, -10.0, 0.0, grid::FlowModel::paper, 1.0, 1.0, 0.0, false);
    CHECK(d.dp[2] == doctest::Approx(-10.0).epsilon(1e-12));  // d f_p / d theta_i
}

TEST_CASE("analytic jacobian matches central differences on random states") {
    for (const char* name :
         {"case2.json", "case2_bimodal.json", "case3.json", "case5_pjm.json"}) {
        const auto net = testsup::load_named_case(name);
        Philox rng(2024, stream_id(name));
        for (int trial = 0; trial < 25; ++trial) {
            PowerFlowState s = acopf::flat_state(net);
            for (int b = 0; b < net.n_buses(); ++b) {
                s.v[b] = 0.95 + 0.1 * rng.uniform();
                s.theta[b] = rng.uniform(-0.4, 0.4);
            }
            for (int g = 0; g < net.n_gens(); ++g) {
                s.p_g[g] = rng.uniform(-1.0, 1.0);
                s.q_g[g] = rng.uniform(-1.0, 1.0);
            }
            BusLoad load = zero_load(net);
            for (int b = 0; b < net.n_buses(); ++b) {
                load.p[b] = rng.uniform(-1.0, 1.0);
                load.q[b] = rng.uniform(-1.0, 1.0);
            }
            const Eigen::MatrixXd analytic =
                Eigen::MatrixXd(acopf::residual_jacobian(net, s));
            const Eigen::MatrixXd fd = testsup::fd_balance_jacobian(net, s, load);
            CHECK(testsup::max_rel_err(analytic, fd) <= 1e-6);
        }
    }
}

TEST_CASE("objective arithmetic") {
    auto net = testsup::load_named_case("case5_pjm.json");
    SUBCASE("all-zero dispatch sums the constant terms") {
        CHECK(acopf::objective(net, Eigen::VectorXd::Zero(5)) == doctest::Approx(0.0));
        for (auto& g : net.generators) g.cost_c0 = 3.5;
        CHECK(acopf::objective(net, Eigen::VectorXd::Zero(5)) == doctest::Approx(17.5));
    }
    SUBCASE("single quadratic generator") {
        grid::Network one;
        one.buses = {{1, 0.9, 1.1, 0.0, 0.0, true}};
        one.generators = {{1, 0.0, 5.0, -1.0, 1.0, 1.0, 2.0, 0.0}};
        one.nominal_load = {{0.0, 0.0}};
        one.validate();
        Eigen::VectorXd p(1);
        p << 3.0;
        CHECK(acopf::objective(one, p) == doctest::Approx(15.0));
    }
}

TEST_CASE("newton power flow drives the 2-bus mismatch below 1e-8") {
    const auto net = testsup::load_named_case("case2.json");
    BusLoad load{Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2)};
    load.p[1] = 0.6;
    load.q[1] = 0.2;
    Eigen::VectorXd p_g(1);
    p_g << 0.0;  // slack generator carries everything
    const auto pf = acopf::solve_powerflow(net, load, acopf::pv_spec(net, p_g, 1.0));
    REQUIRE(pf.status == acopf::SolveStatus::converged);
    CHECK(pf.max_mismatch <= 1e-10);
    const auto r = acopf::power_balance_residual(net, pf.state, load);
    CHECK(r.dp.lpNorm<Eigen::Infinity>() <= 1e-8);
    CHECK(r.dq.lpNorm<Eigen::Infinity>() <= 1e-8);
}

TEST_CASE("newton power flow on the 5-bus benchmark") {
    const auto net = testsup::load_named_case("case5_pjm.json");
    BusLoad load{Eigen::VectorXd::Zero(5), Eigen::VectorXd::Zero(5)};
    for (int b = 0; b < 5; ++b) {
        load.p[b] = net.nominal_load[static_cast<std::size_t>(b)].p;
        load.q[b] = net.nominal_load[static_cast<std::size_t>(b)].q;
    }
    Eigen::VectorXd p_g(5);
    p_g << 0.2, 1.2, 2.8, 0.0, 3.5;  // slack bus 4 picks up the remainder
    const auto pf = acopf::solve_powerflow(net, load, acopf::pv_spec(net, p_g, 1.0));
    REQUIRE(pf.status == acopf::SolveStatus::converged);
    const auto r = acopf::power_balance_residual(net, pf.state, load);
    CHECK(r.dp.lpNorm<Eigen::Infinity>() <= 1e-8);
    CHECK(r.dq.lpNorm<Eigen::Infinity>() <= 1e-8);
}

TEST_CASE("lossless 2-bus power flow is exact in active power") {
    const auto net = two_bus(0.0, -10.0, grid::FlowModel::pi);
    BusLoad load = zero_load(net);
    load.p[1] = 0.5;
    Eigen::VectorXd no_gen(0);
    grid::Network with_gen = net;
    with_gen.generators = {{1, 0.0, 2.0, -1.0, 1.0, 0.0, 1000.0, 0.0}};
    with_gen.validate();
    Eigen::VectorXd pg(1);
    pg << 0.0;
    const auto pf = acopf::solve_powerflow(with_gen, load, acopf::pv_spec(with_gen, pg, 1.0));
    REQUIRE(pf.status == acopf::SolveStatus::converged);
    CHECK(pf.state.p_g[0] == doctest::Approx(0.5).epsilon(1e-9));
}
