#include "test_support.hpp"

#include <algorithm>
#include <cmath>

#include "diffopf/errors.hpp"

#ifndef DIFFOPF_CASE_DIR
#error "DIFFOPF_CASE_DIR must be defined for the test build"
#endif

namespace testsup {

using namespace diffopf;

std::string case_path(const std::string& name) {
    return std::string(DIFFOPF_CASE_DIR) + "/" + name;
}

grid::Network load_named_case(const std::string& name) {
    return grid::load_case(case_path(name));
}

Eigen::MatrixXd fd_balance_jacobian(const grid::Network& net,
                                    const acopf::PowerFlowState& state,
                                    const acopf::BusLoad& load, double h) {
    const int nb = net.n_buses();
    const int ng = net.n_gens();
    const int n = 2 * nb + 2 * ng;
    Eigen::MatrixXd jac(2 * nb, n);

    auto eval = [&](const acopf::PowerFlowState& s) {
        const auto r = acopf::power_balance_residual(net, s, load);
        Eigen::VectorXd out(2 * nb);
        out.head(nb) = r.dp;
        out.tail(nb) = r.dq;
        return out;
    };
    auto bump = [&](int col, double d) {
        acopf::PowerFlowState s = state;
        if (col < nb)
            s.v[col] += d;
        else if (col < 2 * nb)
            s.theta[col - nb] += d;
        else if (col < 2 * nb + ng)
            s.p_g[col - 2 * nb] += d;
        else
            s.q_g[col - 2 * nb - ng] += d;
        return s;
    };
    for (int col = 0; col < n; ++col)
        jac.col(col) = (eval(bump(col, h)) - eval(bump(col, -h))) / (2.0 * h);
    return jac;
}

double max_rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double floor) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            const double denom = std::max({std::abs(a(i, j)), std::abs(b(i, j)), floor});
            worst = std::max(worst, std::abs(a(i, j) - b(i, j)) / denom);
        }
    return worst;
}

BruteForceResult brute_force_opf(const grid::Network& net, const acopf::BusLoad& load,
                                 const Eigen::VectorXd& c1, double resolution) {
    if (net.n_gens() != 2) throw Error("brute_force_opf supports exactly two generators");
    const int slack = net.slack_index();
    int slack_gen = -1, other_gen = -1;
    for (int g = 0; g < net.n_gens(); ++g) {
        if (net.bus_index(net.generators[static_cast<std::size_t>(g)].bus) == slack)
            slack_gen = g;
        else
            other_gen = g;
    }
    if (slack_gen < 0 || other_gen < 0)
        throw Error("brute_force_opf needs one generator at the slack bus and one elsewhere");

    const auto& sg = net.generators[static_cast<std::size_t>(slack_gen)];
    const auto& og = net.generators[static_cast<std::size_t>(other_gen)];
    const double tol = 1e-7;

    BruteForceResult best;
    Eigen::VectorXd p_g(2);
    for (double p = og.p_min; p <= og.p_max + 0.5 * resolution; p += resolution) {
        p_g[slack_gen] = 0.0;  // recovered by the slack balance
        p_g[other_gen] = p;
        const auto spec = acopf::pv_spec(net, p_g, 1.0);
        const auto pf = acopf::solve_powerflow(net, load, spec);
        if (pf.status != acopf::SolveStatus::converged) continue;

        const double p_slack = pf.state.p_g[slack_gen];
        if (p_slack < sg.p_min - tol || p_slack > sg.p_max + tol) continue;
        bool ok = pf.state.q_g[slack_gen] >= sg.q_min - tol &&
                  pf.state.q_g[slack_gen] <= sg.q_max + tol &&
                  pf.state.q_g[other_gen] >= og.q_min - tol &&
                  pf.state.q_g[other_gen] <= og.q_max + tol;
        for (int b = 0; ok && b < net.n_buses(); ++b) {
            const auto& bus = net.buses[static_cast<std::size_t>(b)];
            if (pf.state.v[b] < bus.v_min - tol || pf.state.v[b] > bus.v_max + tol) ok = false;
        }
        const auto flows = acopf::line_flows(net, pf.state);
        for (int l = 0; ok && l < net.n_lines(); ++l) {
            const double s2 = net.lines[static_cast<std::size_t>(l)].s_max *
                              net.lines[static_cast<std::size_t>(l)].s_max;
            if (flows.p_from[l] * flows.p_from[l] + flows.q_from[l] * flows.q_from[l] >
                    s2 + tol ||
                flows.p_to[l] * flows.p_to[l] + flows.q_to[l] * flows.q_to[l] > s2 + tol)
                ok = false;
        }
        if (!ok) continue;

        const double obj = acopf::objective(net, pf.state.p_g, &c1);
        if (!best.found || obj < best.objective) {
            best.found = true;
            best.objective = obj;
            best.p_other = p;
        }
    }
    return best;
}

double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = cdf(samples[i]);
        const double lo = static_cast<double>(i) / n;
        const double hi = static_cast<double>(i + 1) / n;
        worst = std::max({worst, std::abs(f - lo), std::abs(f - hi)});
    }
    return worst;
}

}  // namespace testsup
