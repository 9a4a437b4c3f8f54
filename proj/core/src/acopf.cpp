#include "diffopf/acopf.hpp"

#include <cmath>

#include <Eigen/Dense>
#include <Eigen/SparseLU>

#include "diffopf/errors.hpp"

namespace diffopf::acopf {

using grid::FlowModel;
using grid::Network;

const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::converged: return "converged";
        case SolveStatus::max_iter: return "max_iter";
        case SolveStatus::infeasible: return "infeasible";
    }
    return "unknown";
}

SolveStatus solve_status_from_string(const std::string& s) {
    if (s == "converged") return SolveStatus::converged;
    if (s == "max_iter") return SolveStatus::max_iter;
    if (s == "infeasible") return SolveStatus::infeasible;
    throw ValidationError("unknown solve status: " + s);
}

PowerFlowState flat_state(const Network& net) {
    PowerFlowState s;
    const int nb = net.n_buses();
    const int ng = net.n_gens();
    s.v.resize(nb);
    for (int b = 0; b < nb; ++b) {
        const auto& bus = net.buses[static_cast<std::size_t>(b)];
        s.v[b] = std::min(std::max(1.0, bus.v_min), bus.v_max);
    }
    s.theta = Eigen::VectorXd::Zero(nb);
    s.p_g.resize(ng);
    s.q_g.resize(ng);
    for (int g = 0; g < ng; ++g) {
        const auto& gen = net.generators[static_cast<std::size_t>(g)];
        s.p_g[g] = 0.5 * (gen.p_min + gen.p_max);
        s.q_g[g] = 0.5 * (gen.q_min + gen.q_max);
    }
    return s;
}

namespace {

void check_state_dims(const Network& net, const PowerFlowState& s) {
    if (s.v.size() != net.n_buses() || s.theta.size() != net.n_buses() ||
        s.p_g.size() != net.n_gens() || s.q_g.size() != net.n_gens())
        throw ValidationError("state dimensions do not match the network");
}

void check_load_dims(const Network& net, const BusLoad& load) {
    if (load.p.size() != net.n_buses() || load.q.size() != net.n_buses())
        throw ValidationError("load dimensions do not match the network");
}

}  // namespace

namespace detail {

FlowDeriv flow_deriv(double g, double b, double b_ch, FlowModel model, double v_i, double v_j,
                     double delta, bool with_hessian) {
    const double c = std::cos(delta);
    const double s = std::sin(delta);
    const double k1 = g * c + b * s;   // dk1/ddelta = -k2
    const double k2 = g * s - b * c;   // dk2/ddelta = +k1

    FlowDeriv d;
    d.dp.setZero();
    d.dq.setZero();
    d.d2p.setZero();
    d.d2q.setZero();

    // Cross terms v_i v_j k1 / v_i v_j k2 first; these are the whole flow
    // in the `paper` model and enter with a minus sign in the pi model.
    const double cross_p = v_i * v_j * k1;
    const double cross_q = v_i * v_j * k2;
    Eigen::Vector4d gp(v_j * k1, v_i * k1, -v_i * v_j * k2, v_i * v_j * k2);
    Eigen::Vector4d gq(v_j * k2, v_i * k2, v_i * v_j * k1, -v_i * v_j * k1);

    Eigen::Matrix4d hp = Eigen::Matrix4d::Zero();
    Eigen::Matrix4d hq = Eigen::Matrix4d::Zero();
    if (with_hessian) {
        hp(0, 1) = hp(1, 0) = k1;
        hp(0, 2) = hp(2, 0) = -v_j * k2;
        hp(0, 3) = hp(3, 0) = v_j * k2;
        hp(1, 2) = hp(2, 1) = -v_i * k2;
        hp(1, 3) = hp(3, 1) = v_i * k2;
        hp(2, 2) = hp(3, 3) = -v_i * v_j * k1;
        hp(2, 3) = hp(3, 2) = v_i * v_j * k1;

        hq(0, 1) = hq(1, 0) = k2;
        hq(0, 2) = hq(2, 0) = v_j * k1;
        hq(0, 3) = hq(3, 0) = -v_j * k1;
        hq(1, 2) = hq(2, 1) = v_i * k1;
        hq(1, 3) = hq(3, 1) = -v_i * k1;
        hq(2, 2) = hq(3, 3) = -v_i * v_j * k2;
        hq(2, 3) = hq(3, 2) = v_i * v_j * k2;
    }

    if (model == FlowModel::paper) {
        d.p = cross_p;
        d.q = cross_q;
        d.dp = gp;
        d.dq = gq;
        d.d2p = hp;
        d.d2q = hq;
        return d;
    }

    // pi model: f_p = g v_i^2 - v_i v_j k1,
    //           f_q = -(b + b_ch/2) v_i^2 - v_i v_j k2.
    const double b_self = b + 0.5 * b_ch;
    d.p = g * v_i * v_i - cross_p;
    d.q = -b_self * v_i * v_i - cross_q;
    d.dp = -gp;
    d.dp[0] += 2.0 * g * v_i;
    d.dq = -gq;
    d.dq[0] += -2.0 * b_self * v_i;
    if (with_hessian) {
        d.d2p = -hp;
        d.d2p(0, 0) += 2.0 * g;
        d.d2q = -hq;
        d.d2q(0, 0) += -2.0 * b_self;
    }
    return d;
}

void add_balance_hessian(const Network& net, const PowerFlowState& state,
                         const Eigen::VectorXd& w_p, const Eigen::VectorXd& w_q,
                         std::vector<Eigen::Triplet<double>>& out) {
    const VarMap m{net.n_buses(), net.n_gens()};
    const bool pi = net.flow_model == FlowModel::pi;

    for (int l = 0; l < net.n_lines(); ++l) {
        const auto& ln = net.lines[static_cast<std::size_t>(l)];
        const int i = net.line_from_index(l);
        const int j = net.line_to_index(l);
        const double delta = state.theta[i] - state.theta[j];

        const auto fwd = flow_deriv(ln.g, ln.b, ln.b_ch, net.flow_model, state.v[i], state.v[j],
                                    delta, true);
        const auto rev = flow_deriv(ln.g, ln.b, ln.b_ch, net.flow_model, state.v[j], state.v[i],
                                    -delta, true);

        // Local order for fwd: (v_i, v_j, th_i, th_j); rev swaps buses.
        const int fwd_vars[4] = {m.v(i), m.v(j), m.th(i), m.th(j)};
        const int rev_vars[4] = {m.v(j), m.v(i), m.th(j), m.th(i)};

        // Residual rows subtract the outgoing flow, hence the minus.
        const Eigen::Matrix4d hf = -(w_p[i] * fwd.d2p + w_q[i] * fwd.d2q);
        const Eigen::Matrix4d hr = -(w_p[j] * rev.d2p + w_q[j] * rev.d2q);
        for (int a = 0; a < 4; ++a)
            for (int bcol = 0; bcol < 4; ++bcol) {
                if (hf(a, bcol) != 0.0) out.emplace_back(fwd_vars[a], fwd_vars[bcol], hf(a, bcol));
                if (hr(a, bcol) != 0.0) out.emplace_back(rev_vars[a], rev_vars[bcol], hr(a, bcol));
            }
    }

    if (pi) {
        for (int b = 0; b < net.n_buses(); ++b) {
            const auto& bus = net.buses[static_cast<std::size_t>(b)];
            // dp has -g_sh v^2, dq has +b_sh v^2.
            const double h = w_p[b] * (-2.0 * bus.g_sh) + w_q[b] * (2.0 * bus.b_sh);
            if (h != 0.0) out.emplace_back(m.v(b), m.v(b), h);
        }
    }
}

}  // namespace detail

LineFlows line_flows(const Network& net, const PowerFlowState& state, FlowModel model) {
    check_state_dims(net, state);
    const int nl = net.n_lines();
    LineFlows f;
    f.p_from.resize(nl);
    f.q_from.resize(nl);
    f.p_to.resize(nl);
    f.q_to.resize(nl);
    for (int l = 0; l < nl; ++l) {
        const auto& ln = net.lines[static_cast<std::size_t>(l)];
        const int i = net.line_from_index(l);
        const int j = net.line_to_index(l);
        const double delta = state.theta[i] - state.theta[j];
        const auto fwd = detail::flow_deriv(ln.g, ln.b, ln.b_ch, model, state.v[i], state.v[j],
                                            delta, false);
        const auto rev = detail::flow_deriv(ln.g, ln.b, ln.b_ch, model, state.v[j], state.v[i],
                                            -delta, false);
        f.p_from[l] = fwd.p;
        f.q_from[l] = fwd.q;
        f.p_to[l] = rev.p;
        f.q_to[l] = rev.q;
    }
    return f;
}

LineFlows line_flows(const Network& net, const PowerFlowState& state) {
    return line_flows(net, state, net.flow_model);
}

BalanceResidual power_balance_residual(const Network& net, const PowerFlowState& state,
                                       const BusLoad& load) {
    check_state_dims(net, state);
    check_load_dims(net, load);
    const int nb = net.n_buses();
    BalanceResidual r;
    r.dp = -load.p;
    r.dq = -load.q;
    for (int g = 0; g < net.n_gens(); ++g) {
        const int b = net.bus_index(net.generators[static_cast<std::size_t>(g)].bus);
        r.dp[b] += state.p_g[g];
        r.dq[b] += state.q_g[g];
    }
    if (net.flow_model == FlowModel::pi) {
        for (int b = 0; b < nb; ++b) {
            const auto& bus = net.buses[static_cast<std::size_t>(b)];
            r.dp[b] -= bus.g_sh * state.v[b] * state.v[b];
            r.dq[b] += bus.b_sh * state.v[b] * state.v[b];
        }
    }
    const LineFlows f = line_flows(net, state);
    for (int l = 0; l < net.n_lines(); ++l) {
        const int i = net.line_from_index(l);
        const int j = net.line_to_index(l);
        r.dp[i] -= f.p_from[l];
        r.dq[i] -= f.q_from[l];
        r.dp[j] -= f.p_to[l];
        r.dq[j] -= f.q_to[l];
    }
    return r;
}

Eigen::SparseMatrix<double> residual_jacobian(const Network& net, const PowerFlowState& state) {
    check_state_dims(net, state);
    const detail::VarMap m{net.n_buses(), net.n_gens()};
    const int nb = net.n_buses();
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<std::size_t>(16 * net.n_lines() + 2 * net.n_gens() + 2 * nb));

    for (int g = 0; g < net.n_gens(); ++g) {
        const int b = net.bus_index(net.generators[static_cast<std::size_t>(g)].bus);
        t.emplace_back(b, m.pg(g), 1.0);
        t.emplace_back(nb + b, m.qg(g), 1.0);
    }
    if (net.flow_model == FlowModel::pi) {
        for (int b = 0; b < nb; ++b) {
            const auto& bus = net.buses[static_cast<std::size_t>(b)];
            if (bus.g_sh != 0.0) t.emplace_back(b, m.v(b), -2.0 * bus.g_sh * state.v[b]);
            if (bus.b_sh != 0.0) t.emplace_back(nb + b, m.v(b), 2.0 * bus.b_sh * state.v[b]);
        }
    }
    for (int l = 0; l < net.n_lines(); ++l) {
        const auto& ln = net.lines[static_cast<std::size_t>(l)];
        const int i = net.line_from_index(l);
        const int j = net.line_to_index(l);
        const double delta = state.theta[i] - state.theta[j];
        const auto fwd = detail::flow_deriv(ln.g, ln.b, ln.b_ch, net.flow_model, state.v[i],
                                            state.v[j], delta, false);
        const auto rev = detail::flow_deriv(ln.g, ln.b, ln.b_ch, net.flow_model, state.v[j],
                                            state.v[i], -delta, false);
        const int fwd_vars[4] = {m.v(i), m.v(j), m.th(i), m.th(j)};
        const int rev_vars[4] = {m.v(j), m.v(i), m.th(j), m.th(i)};
        for (int a = 0; a < 4; ++a) {
            if (fwd.dp[a] != 0.0) t.emplace_back(i, fwd_vars[a], -fwd.dp[a]);
            if (fwd.dq[a] != 0.0) t.emplace_back(nb + i, fwd_vars[a], -fwd.dq[a]);
            if (rev.dp[a] != 0.0) t.emplace_back(j, rev_vars[a], -rev.dp[a]);
            if (rev.dq[a] != 0.0) t.emplace_back(nb + j, rev_vars[a], -rev.dq[a]);
        }
    }

    Eigen::SparseMatrix<double> jac(2 * nb, m.size());
    jac.setFromTriplets(t.begin(), t.end());
    return jac;
}

double objective(const Network& net, const Eigen::VectorXd& p_g,
                 const Eigen::VectorXd* c1_override) {
    if (p_g.size() != net.n_gens())
        throw ValidationError("dispatch dimension does not match generator count");
    if (c1_override && c1_override->size() != net.n_gens())
        throw ValidationError("c1 override dimension does not match generator count");
    double total = 0.0;
    for (int g = 0; g < net.n_gens(); ++g) {
        const auto& gen = net.generators[static_cast<std::size_t>(g)];
        const double c1 = c1_override ? (*c1_override)[g] : gen.cost_c1;
        total += gen.cost_c2 * p_g[g] * p_g[g] + c1 * p_g[g] + gen.cost_c0;
    }
    return total;
}

// ---------------------------------------------------------------------------
// Newton power flow

PowerFlowSpec pv_spec(const Network& net, const Eigen::VectorXd& p_g, double v_set) {
    if (p_g.size() != net.n_gens())
        throw ValidationError("dispatch dimension does not match generator count");
    const int nb = net.n_buses();
    PowerFlowSpec spec;
    spec.kind.assign(static_cast<std::size_t>(nb), BusKind::pq);
    spec.v_set = Eigen::VectorXd::Constant(nb, v_set);
    spec.p_gen = Eigen::VectorXd::Zero(nb);
    spec.q_gen = Eigen::VectorXd::Zero(nb);
    for (int g = 0; g < net.n_gens(); ++g) {
        const int b = net.bus_index(net.generators[static_cast<std::size_t>(g)].bus);
        spec.kind[static_cast<std::size_t>(b)] = BusKind::pv;
        spec.p_gen[b] += p_g[g];
    }
    spec.kind[static_cast<std::size_t>(net.slack_index())] = BusKind::slack;
    return spec;
}

PowerFlowResult solve_powerflow(const Network& net, const BusLoad& load,
                                const PowerFlowSpec& spec, const PowerFlowOptions& opts) {
    check_load_dims(net, load);
    const int nb = net.n_buses();
    if (static_cast<int>(spec.kind.size()) != nb)
        throw ValidationError("power-flow spec dimensions do not match the network");
    const int slack = net.slack_index();
    if (spec.kind[static_cast<std::size_t>(slack)] != BusKind::slack)
        throw ValidationError("power-flow spec must mark the network slack bus as slack");

    // Unknown layout: theta at non-slack buses, then v at pq buses.
    std::vector<int> th_of;   // unknown index -> bus
    std::vector<int> v_of;
    for (int b = 0; b < nb; ++b)
        if (b != slack) th_of.push_back(b);
    for (int b = 0; b < nb; ++b)
        if (spec.kind[static_cast<std::size_t>(b)] == BusKind::pq) v_of.push_back(b);
    const int n_th = static_cast<int>(th_of.size());
    const int n_v = static_cast<int>(v_of.size());
    const int n = n_th + n_v;

    PowerFlowState st;
    st.v = spec.v_set;
    st.theta = Eigen::VectorXd::Zero(nb);
    st.p_g = Eigen::VectorXd::Zero(net.n_gens());
    st.q_g = Eigen::VectorXd::Zero(net.n_gens());
    for (int k = 0; k < n_v; ++k) st.v[v_of[static_cast<std::size_t>(k)]] = 1.0;

    // Residual rows: P at every non-slack bus, Q at pq buses; a bus with
    // specified generation contributes it as a constant injection.
    auto mismatch = [&](const PowerFlowState& s) {
        BalanceResidual r = power_balance_residual(net, s, load);
        Eigen::VectorXd mm(n);
        for (int k = 0; k < n_th; ++k) {
            const int b = th_of[static_cast<std::size_t>(k)];
            mm[k] = r.dp[b] + spec.p_gen[b];
        }
        for (int k = 0; k < n_v; ++k) {
            const int b = v_of[static_cast<std::size_t>(k)];
            mm[n_th + k] = r.dq[b] + spec.q_gen[b];
        }
        return mm;
    };

    const detail::VarMap vm{nb, net.n_gens()};
    SolveStatus status = SolveStatus::max_iter;
    Eigen::VectorXd mm = mismatch(st);
    int it = 0;
    for (; it < opts.max_iter; ++it) {
        if (!mm.allFinite()) break;
        if (mm.lpNorm<Eigen::Infinity>() <= opts.tol) {
            status = SolveStatus::converged;
            break;
        }
        const Eigen::SparseMatrix<double> full = residual_jacobian(net, st);
        Eigen::MatrixXd jac(n, n);
        for (int r = 0; r < n; ++r) {
            const bool p_row = r < n_th;
            const int bus = p_row ? th_of[static_cast<std::size_t>(r)]
                                  : v_of[static_cast<std::size_t>(r - n_th)];
            const int full_row = p_row ? bus : nb + bus;
            for (int c = 0; c < n; ++c) {
                const bool th_col = c < n_th;
                const int cbus = th_col ? th_of[static_cast<std::size_t>(c)]
                                        : v_of[static_cast<std::size_t>(c - n_th)];
                const int full_col = th_col ? vm.th(cbus) : vm.v(cbus);
                jac(r, c) = full.coeff(full_row, full_col);
            }
        }
        const Eigen::VectorXd step = jac.fullPivLu().solve(-mm);
        if (!step.allFinite()) break;

        // Damped update: halve until the mismatch norm does not blow up.
        double alpha = 1.0;
        const double base = mm.lpNorm<Eigen::Infinity>();
        PowerFlowState trial = st;
        for (int ls = 0; ls < 12; ++ls) {
            trial = st;
            for (int k = 0; k < n_th; ++k)
                trial.theta[th_of[static_cast<std::size_t>(k)]] += alpha * step[k];
            for (int k = 0; k < n_v; ++k)
                trial.v[v_of[static_cast<std::size_t>(k)]] += alpha * step[n_th + k];
            const Eigen::VectorXd mm_trial = mismatch(trial);
            if (mm_trial.allFinite() && mm_trial.lpNorm<Eigen::Infinity>() < base) {
                st = trial;
                mm = mm_trial;
                break;
            }
            alpha *= 0.5;
            if (ls == 11) {
                st = trial;
                mm = mismatch(st);
            }
        }
    }

    PowerFlowResult res;
    res.iterations = it;
    res.status = status;
    res.max_mismatch = mm.allFinite() ? mm.lpNorm<Eigen::Infinity>() : std::nan("");

    // Close the balance: recover slack P and every non-pq bus Q.
    BalanceResidual r = power_balance_residual(net, st, load);
    res.bus_p_gen = spec.p_gen;
    res.bus_q_gen = spec.q_gen;
    for (int b = 0; b < nb; ++b) {
        const BusKind k = spec.kind[static_cast<std::size_t>(b)];
        if (k == BusKind::slack) res.bus_p_gen[b] = -r.dp[b];
        if (k != BusKind::pq) res.bus_q_gen[b] = -r.dq[b];
    }
    for (int g = 0; g < net.n_gens(); ++g) {
        const int b = net.bus_index(net.generators[static_cast<std::size_t>(g)].bus);
        const auto& gens = net.gens_at_bus(b);
        st.p_g[g] = res.bus_p_gen[b] / static_cast<double>(gens.size());
        st.q_g[g] = res.bus_q_gen[b] / static_cast<double>(gens.size());
    }
    res.state = st;
    return res;
}

}  // namespace diffopf::acopf
