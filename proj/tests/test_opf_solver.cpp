#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>

#include "diffopf/acopf.hpp"
#include "diffopf/grid.hpp"
#include "test_support.hpp"

using namespace diffopf;
using acopf::BusLoad;
using acopf::SolveStatus;

namespace {

BusLoad nominal_load(const grid::Network& net) {
    BusLoad l{Eigen::VectorXd::Zero(net.n_buses()), Eigen::VectorXd::Zero(net.n_buses())};
    for (int b = 0; b < net.n_buses(); ++b) {
        l.p[b] = net.nominal_load[static_cast<std::size_t>(b)].p;
        l.q[b] = net.nominal_load[static_cast<std::size_t>(b)].q;
    }
    return l;
}

void check_feasible(const grid::Network& net, const acopf::OpfSolution& sol,
                    const BusLoad& load, double tol_feas = 1e-6) {
    const auto r = acopf::power_balance_residual(net, sol.state, load);
    CHECK(r.dp.lpNorm<Eigen::Infinity>() <= 1e-8);
    CHECK(r.dq.lpNorm<Eigen::Infinity>() <= 1e-8);
    for (int g = 0; g < net.n_gens(); ++g) {
        const auto& gen = net.generators[static_cast<std::size_t>(g)];
        CHECK(sol.state.p_g[g] >= gen.p_min - tol_feas);
        CHECK(sol.state.p_g[g] <= gen.p_max + tol_feas);
        CHECK(sol.state.q_g[g] >= gen.q_min - tol_feas);
        CHECK(sol.state.q_g[g] <= gen.q_max + tol_feas);
    }
    for (int b = 0; b < net.n_buses(); ++b) {
        const auto& bus = net.buses[static_cast<std::size_t>(b)];
        CHECK(sol.state.v[b] >= bus.v_min - tol_feas);
        CHECK(sol.state.v[b] <= bus.v_max + tol_feas);
    }
    const auto f = acopf::line_flows(net, sol.state);
    for (int l = 0; l < net.n_lines(); ++l) {
        const double s2 = net.lines[static_cast<std::size_t>(l)].s_max *
                          net.lines[static_cast<std::size_t>(l)].s_max;
        CHECK(f.p_from[l] * f.p_from[l] + f.q_from[l] * f.q_from[l] <= s2 + tol_feas);
        CHECK(f.p_to[l] * f.p_to[l] + f.q_to[l] * f.q_to[l] <= s2 + tol_feas);
    }
}

}  // namespace

TEST_CASE("one-bus self-sufficient case pins dispatch to the load") {
    grid::Network net;
    net.buses = {{1, 0.95, 1.05, 0.0, 0.0, true}};
    net.generators = {{1, 0.0, 2.0, -1.0, 1.0, 10.0, 500.0, 0.0}};
    net.nominal_load = {{0.7, 0.21}};
    net.validate();
    const BusLoad load = nominal_load(net);
    const auto sol = acopf::solve_opf(net, load);
    REQUIRE(sol.status == SolveStatus::converged);
    CHECK(sol.state.p_g[0] == doctest::Approx(0.7).epsilon(1e-8));
    CHECK(sol.state.q_g[0] == doctest::Approx(0.21).epsilon(1e-8));
    CHECK(sol.kkt_residual <= 1e-6);
}

TEST_CASE("2-bus lossless case: balance forces p_g = load, objective = c(load)") {
    grid::Network net;
    net.buses = {{1, 0.95, 1.05, 0.0, 0.0, true}, {2, 0.95, 1.05, 0.0, 0.0, false}};
    net.generators = {{1, 0.0, 2.0, -1.0, 1.0, 100.0, 1500.0, 0.0}};
    net.lines = {{1, 2, 0.0, -10.0, 0.0, 5.0}};
    net.nominal_load = {{0.0, 0.0}, {0.5, 0.1}};
    net.validate();
    const BusLoad load = nominal_load(net);
    const auto sol = acopf::solve_opf(net, load);
    REQUIRE(sol.status == SolveStatus::converged);
    CHECK(sol.state.p_g[0] == doctest::Approx(0.5).epsilon(1e-7));
    CHECK(sol.objective == doctest::Approx(100.0 * 0.25 + 1500.0 * 0.5).epsilon(1e-6));
    check_feasible(net, sol, load);
}

TEST_CASE("3-bus two-generator case matches the grid-search oracle within 0.1%") {
    const auto net = testsup::load_named_case("case3.json");
    const BusLoad load = nominal_load(net);
    Eigen::VectorXd c1(2);
    c1 << 2000.0, 2800.0;

    const auto oracle = testsup::brute_force_opf(net, load, c1, 1e-3);
    REQUIRE(oracle.found);

    const auto sol = acopf::solve_opf(net, load, c1);
    REQUIRE(sol.status == SolveStatus::converged);
    check_feasible(net, sol, load);
    CHECK(std::abs(sol.objective - oracle.objective) <= 1e-3 * oracle.objective);
}

TEST_CASE("5-bus benchmark solves to a feasible local optimum") {
    const auto net = testsup::load_named_case("case5_pjm.json");
    const BusLoad load = nominal_load(net);
    const auto sol = acopf::solve_opf(net, load);
    REQUIRE(sol.status == SolveStatus::converged);
    CHECK(sol.kkt_residual <= 1e-6);
    check_feasible(net, sol, load);
    // the published optimum for this system sits near 17552
    CHECK(sol.objective > 15000.0);
    CHECK(sol.objective < 20000.0);
}

TEST_CASE("removing the flow limits never increases the objective") {
    const auto net = testsup::load_named_case("case5_pjm.json");
    const BusLoad load = nominal_load(net);
    acopf::OpfOptions with{};
    acopf::OpfOptions without{};
    without.enforce_flow_limits = false;
    const auto a = acopf::solve_opf(net, load, std::nullopt, std::nullopt, with);
    const auto b = acopf::solve_opf(net, load, std::nullopt, std::nullopt, without);
    REQUIRE(a.status == SolveStatus::converged);
    REQUIRE(b.status == SolveStatus::converged);
    CHECK(b.objective <= a.objective + 1e-6 * std::abs(a.objective));
}

TEST_CASE("identical inputs give bitwise identical solutions") {
    const auto net = testsup::load_named_case("case3.json");
    const BusLoad load = nominal_load(net);
    const auto a = acopf::solve_opf(net, load);
    const auto b = acopf::solve_opf(net, load);
    REQUIRE(a.status == SolveStatus::converged);
    CHECK(std::memcmp(a.state.v.data(), b.state.v.data(),
                      sizeof(double) * a.state.v.size()) == 0);
    CHECK(std::memcmp(a.state.theta.data(), b.state.theta.data(),
                      sizeof(double) * a.state.theta.size()) == 0);
    CHECK(std::memcmp(a.state.p_g.data(), b.state.p_g.data(),
                      sizeof(double) * a.state.p_g.size()) == 0);
    CHECK(a.objective == b.objective);
    CHECK(a.iterations == b.iterations);
}

TEST_CASE("infeasible load is reported, not silently converged") {
    const auto net = testsup::load_named_case("case2.json");
    BusLoad load = nominal_load(net);
    load.p[1] = 50.0;  // far beyond generation and line capability
    const auto sol = acopf::solve_opf(net, load);
    CHECK(sol.status != SolveStatus::converged);
}

TEST_CASE("cost override changes the objective accounting") {
    const auto net = testsup::load_named_case("case3.json");
    const BusLoad load = nominal_load(net);
    Eigen::VectorXd cheap_second(2);
    cheap_second << 2000.0, 1200.0;
    const auto base = acopf::solve_opf(net, load);
    const auto swapped = acopf::solve_opf(net, load, cheap_second);
    REQUIRE(base.status == SolveStatus::converged);
    REQUIRE(swapped.status == SolveStatus::converged);
    // with the second generator much cheaper, it should carry more power
    CHECK(swapped.state.p_g[1] > base.state.p_g[1]);
}
