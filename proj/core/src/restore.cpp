#include "diffopf/restore.hpp"

#include <cmath>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "diffopf/errors.hpp"

namespace diffopf::restore {

using acopf::BusLoad;
using acopf::PowerFlowState;
using acopf::SolveStatus;
using grid::Network;

namespace {

// Variable layout: [v(nb); theta(non-slack, nb-1); p_g; q_g].
struct Vars {
    int nb, ng, slack, n;
    explicit Vars(const Network& net)
        : nb(net.n_buses()), ng(net.n_gens()), slack(net.slack_index()),
          n(2 * net.n_buses() - 1 + 2 * net.n_gens()) {}
    int v(int b) const { return b; }
    int th(int b) const { return b == slack ? -1 : nb + (b < slack ? b : b - 1); }
    int pg(int g) const { return 2 * nb - 1 + g; }
    int qg(int g) const { return 2 * nb - 1 + ng + g; }
};

PowerFlowState unpack(const Vars& vm, const Eigen::VectorXd& u) {
    PowerFlowState s;
    s.v.resize(vm.nb);
    s.theta = Eigen::VectorXd::Zero(vm.nb);
    s.p_g.resize(vm.ng);
    s.q_g.resize(vm.ng);
    for (int b = 0; b < vm.nb; ++b) {
        s.v[b] = u[vm.v(b)];
        if (b != vm.slack) s.theta[b] = u[vm.th(b)];
    }
    for (int g = 0; g < vm.ng; ++g) {
        s.p_g[g] = u[vm.pg(g)];
        s.q_g[g] = u[vm.qg(g)];
    }
    return s;
}

}  // namespace

RestorationResult restore(const Network& net, const BusLoad& load,
                          const Eigen::VectorXd& p_g_warm, const Eigen::VectorXd& q_g_warm,
                          const RestoreOptions& opts) {
    if (p_g_warm.size() != net.n_gens() || q_g_warm.size() != net.n_gens())
        throw ValidationError("warm-start dispatch dimension does not match the network");
    if (load.p.size() != net.n_buses() || load.q.size() != net.n_buses())
        throw ValidationError("load dimensions do not match the network");

    const Vars vm(net);
    Eigen::VectorXd u(vm.n);
    for (int b = 0; b < vm.nb; ++b) u[vm.v(b)] = 1.0;
    for (int b = 0; b < vm.nb; ++b)
        if (b != vm.slack) u[vm.th(b)] = 0.0;
    for (int g = 0; g < vm.ng; ++g) {
        u[vm.pg(g)] = p_g_warm[g];
        u[vm.qg(g)] = q_g_warm[g];
    }

    auto balance = [&](const Eigen::VectorXd& uu) {
        const PowerFlowState s = unpack(vm, uu);
        const acopf::BalanceResidual r = acopf::power_balance_residual(net, s, load);
        Eigen::VectorXd c(2 * vm.nb);
        c.head(vm.nb) = r.dp;
        c.tail(vm.nb) = r.dq;
        return c;
    };
    auto balance_jac = [&](const Eigen::VectorXd& uu) {
        const PowerFlowState s = unpack(vm, uu);
        const Eigen::SparseMatrix<double> full = acopf::residual_jacobian(net, s);
        Eigen::MatrixXd j = Eigen::MatrixXd::Zero(2 * vm.nb, vm.n);
        auto map_col = [&](int full_col) -> int {
            if (full_col < vm.nb) return vm.v(full_col);
            if (full_col < 2 * vm.nb) return vm.th(full_col - vm.nb);
            if (full_col < 2 * vm.nb + vm.ng) return vm.pg(full_col - 2 * vm.nb);
            return vm.qg(full_col - 2 * vm.nb - vm.ng);
        };
        for (int col = 0; col < full.outerSize(); ++col) {
            const int red = map_col(col);
            if (red < 0) continue;
            for (Eigen::SparseMatrix<double>::InnerIterator it(full, col); it; ++it)
                j(it.row(), red) = it.value();
        }
        return j;
    };
    auto data_residual = [&](const Eigen::VectorXd& uu) {
        Eigen::VectorXd r(2 * vm.ng);
        for (int g = 0; g < vm.ng; ++g) {
            r[g] = uu[vm.pg(g)] - p_g_warm[g];
            r[vm.ng + g] = uu[vm.qg(g)] - q_g_warm[g];
        }
        return r;
    };

    double rho = opts.rho0;
    Eigen::VectorXd lam = Eigen::VectorXd::Zero(2 * vm.nb);
    Eigen::VectorXd c = balance(u);
    double prev_cnorm = c.lpNorm<Eigen::Infinity>();
    int total_inner = 0;
    SolveStatus status = SolveStatus::max_iter;

    for (int outer = 0; outer < opts.max_outer; ++outer) {
        // Inner Gauss-Newton on  ||r_d||^2 + lam'c + (rho/2)||c||^2.
        for (int inner = 0; inner < opts.max_inner; ++inner, ++total_inner) {
            const Eigen::VectorXd rd = data_residual(u);
            c = balance(u);
            const Eigen::MatrixXd jc = balance_jac(u);
            Eigen::VectorXd grad = jc.transpose() * (lam + rho * c);
            for (int g = 0; g < vm.ng; ++g) {
                grad[vm.pg(g)] += 2.0 * rd[g];
                grad[vm.qg(g)] += 2.0 * rd[vm.ng + g];
            }
            const double gnorm = grad.lpNorm<Eigen::Infinity>();
            if (gnorm <= 1e-10 * (1.0 + rho * c.lpNorm<Eigen::Infinity>())) break;

            Eigen::MatrixXd h = rho * (jc.transpose() * jc);
            for (int g = 0; g < vm.ng; ++g) {
                h(vm.pg(g), vm.pg(g)) += 2.0;
                h(vm.qg(g), vm.qg(g)) += 2.0;
            }
            h.diagonal().array() += 1e-10 * (1.0 + rho);
            const Eigen::VectorXd step = h.ldlt().solve(-grad);
            if (!step.allFinite()) break;

            auto phi = [&](const Eigen::VectorXd& uu) {
                const Eigen::VectorXd rdd = data_residual(uu);
                const Eigen::VectorXd cc = balance(uu);
                return rdd.squaredNorm() + lam.dot(cc) + 0.5 * rho * cc.squaredNorm();
            };
            const double phi0 = phi(u);
            const double slope = grad.dot(step);
            double alpha = 1.0;
            bool ok = false;
            for (int ls = 0; ls < 40; ++ls) {
                const Eigen::VectorXd trial = u + alpha * step;
                const double phi1 = phi(trial);
                if (std::isfinite(phi1) && phi1 <= phi0 + 1e-4 * alpha * slope) {
                    u = trial;
                    ok = true;
                    break;
                }
                alpha *= 0.5;
            }
            if (!ok) break;
        }

        c = balance(u);
        const double cnorm = c.lpNorm<Eigen::Infinity>();
        if (cnorm <= opts.tol_balance) {
            status = SolveStatus::converged;
            break;
        }
        if (cnorm <= 0.25 * prev_cnorm) {
            lam += rho * c;
        } else {
            rho = std::min(rho * 10.0, opts.rho_max);
            lam += rho * c;
        }
        prev_cnorm = cnorm;
    }

    RestorationResult res;
    res.state = unpack(vm, u);
    res.projection_objective = data_residual(u).squaredNorm();
    res.status = status;
    res.iterations = total_inner;
    res.balance_residual_inf = balance(u).lpNorm<Eigen::Infinity>();
    return res;
}

WarmStartScore score(const Network& net, const dataset::OpfRecord& truth,
                     const RestorationResult& result, const Eigen::VectorXd& p_g_warm,
                     const Eigen::VectorXd& q_g_warm) {
    if (result.status != SolveStatus::converged)
        throw ValidationError("score requires a converged restoration");
    WarmStartScore s;
    const double c_restored = restored_cost(net, truth, result);
    s.optimality_gap = std::abs(c_restored - truth.objective);
    s.optimality_gap_pct =
        truth.objective != 0.0 ? 100.0 * s.optimality_gap / std::abs(truth.objective) : 0.0;
    s.setpoint_error = (result.state.p_g - p_g_warm).squaredNorm() +
                       (result.state.q_g - q_g_warm).squaredNorm();
    double over = 0.0, under = 0.0;
    for (int b = 0; b < net.n_buses(); ++b) {
        const auto& bus = net.buses[static_cast<std::size_t>(b)];
        const double hi = std::max(0.0, result.state.v[b] - bus.v_max);
        const double lo = std::max(0.0, bus.v_min - result.state.v[b]);
        over += hi * hi;
        under += lo * lo;
    }
    s.voltage_violation = std::sqrt(over) + std::sqrt(under);
    return s;
}

double restored_cost(const Network& net, const dataset::OpfRecord& truth,
                     const RestorationResult& result) {
    return acopf::objective(net, result.state.p_g, &truth.c1_realized);
}

}  // namespace diffopf::restore
