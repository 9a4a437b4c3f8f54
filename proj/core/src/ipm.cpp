#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "diffopf/acopf.hpp"
#include "diffopf/errors.hpp"
#include "diffopf/rng.hpp"

namespace diffopf::acopf {

using grid::FlowModel;
using grid::Network;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPinGap = 1e-12;  // lo == hi up to this gap becomes an equality

struct BoxVar {
    int x_idx;
    double lo, hi;
};

struct FlowCon {
    int line;
    bool from_side;
    double s_max2;
};

// Primal-dual interior-point method on
//   min  sigma * f(x)
//   s.t. c_E(x) = 0           (power balance + pinned variables)
//        h(x) >= 0            (box bounds, apparent-flow limits)
// with slacks h(x) - s = 0, s > 0, Mehrotra predictor-corrector steps,
// fraction-to-boundary step limits, and an l1 merit line search.
class OpfIpm {
public:
    OpfIpm(const Network& net, const BusLoad& load, const Eigen::VectorXd& c1,
           const OpfOptions& opts)
        : net_(net), load_(load), c1_(c1), opts_(opts) {
        nb_ = net.n_buses();
        ng_ = net.n_gens();
        slack_ = net.slack_index();
        nx_ = nb_ + (nb_ - 1) + 2 * ng_;

        const detail::VarMap vm{nb_, ng_};
        red_of_full_.assign(static_cast<std::size_t>(vm.size()), -1);
        int k = 0;
        for (int b = 0; b < nb_; ++b) red_of_full_[static_cast<std::size_t>(vm.v(b))] = k++;
        for (int b = 0; b < nb_; ++b)
            if (b != slack_) red_of_full_[static_cast<std::size_t>(vm.th(b))] = k++;
        for (int g = 0; g < ng_; ++g) red_of_full_[static_cast<std::size_t>(vm.pg(g))] = k++;
        for (int g = 0; g < ng_; ++g) red_of_full_[static_cast<std::size_t>(vm.qg(g))] = k++;

        auto add_box = [&](int x_idx, double lo, double hi) {
            if (hi - lo <= kPinGap) {
                pins_.push_back({x_idx, lo});
            } else {
                boxes_.push_back({x_idx, lo, hi});
            }
        };
        for (int b = 0; b < nb_; ++b)
            add_box(x_of_v(b), net.buses[static_cast<std::size_t>(b)].v_min,
                    net.buses[static_cast<std::size_t>(b)].v_max);
        for (int g = 0; g < ng_; ++g) {
            const auto& gen = net.generators[static_cast<std::size_t>(g)];
            add_box(x_of_pg(g), gen.p_min, gen.p_max);
            add_box(x_of_qg(g), gen.q_min, gen.q_max);
        }
        if (opts.enforce_flow_limits) {
            for (int l = 0; l < net.n_lines(); ++l) {
                const double s2 = net.lines[static_cast<std::size_t>(l)].s_max *
                                  net.lines[static_cast<std::size_t>(l)].s_max;
                flows_.push_back({l, true, s2});
                flows_.push_back({l, false, s2});
            }
        }
        m_eq_ = 2 * nb_ + static_cast<int>(pins_.size());
        m_in_ = 0;
        for (const auto& bx : boxes_) {
            if (bx.lo > -kInf) ++m_in_;
            if (bx.hi < kInf) ++m_in_;
        }
        m_in_ += static_cast<int>(flows_.size());
    }

    int x_of_v(int bus) const { return bus; }
    int x_of_th(int bus) const {
        return bus == slack_ ? -1 : nb_ + (bus < slack_ ? bus : bus - 1);
    }
    int x_of_pg(int g) const { return 2 * nb_ - 1 + g; }
    int x_of_qg(int g) const { return 2 * nb_ - 1 + ng_ + g; }

    PowerFlowState to_state(const Eigen::VectorXd& x) const {
        PowerFlowState s;
        s.v.resize(nb_);
        s.theta = Eigen::VectorXd::Zero(nb_);
        s.p_g.resize(ng_);
        s.q_g.resize(ng_);
        for (int b = 0; b < nb_; ++b) {
            s.v[b] = x[x_of_v(b)];
            if (b != slack_) s.theta[b] = x[x_of_th(b)];
        }
        for (int g = 0; g < ng_; ++g) {
            s.p_g[g] = x[x_of_pg(g)];
            s.q_g[g] = x[x_of_qg(g)];
        }
        return s;
    }

    Eigen::VectorXd from_state(const PowerFlowState& s) const {
        Eigen::VectorXd x(nx_);
        for (int b = 0; b < nb_; ++b) {
            x[x_of_v(b)] = s.v[b];
            if (b != slack_) x[x_of_th(b)] = s.theta[b];
        }
        for (int g = 0; g < ng_; ++g) {
            x[x_of_pg(g)] = s.p_g[g];
            x[x_of_qg(g)] = s.q_g[g];
        }
        return x;
    }

    double f_raw(const Eigen::VectorXd& x) const {
        double total = 0.0;
        for (int g = 0; g < ng_; ++g) {
            const auto& gen = net_.generators[static_cast<std::size_t>(g)];
            const double p = x[x_of_pg(g)];
            total += gen.cost_c2 * p * p + c1_[g] * p + gen.cost_c0;
        }
        return total;
    }

    Eigen::VectorXd grad_f_raw(const Eigen::VectorXd& x) const {
        Eigen::VectorXd g = Eigen::VectorXd::Zero(nx_);
        for (int gi = 0; gi < ng_; ++gi) {
            const auto& gen = net_.generators[static_cast<std::size_t>(gi)];
            g[x_of_pg(gi)] = 2.0 * gen.cost_c2 * x[x_of_pg(gi)] + c1_[gi];
        }
        return g;
    }

    struct Eval {
        double f;                        // scaled objective
        Eigen::VectorXd grad_f;          // scaled
        Eigen::VectorXd c;               // equality residuals
        Eigen::VectorXd h;               // inequality values
        Eigen::SparseMatrix<double> j_eq, j_in;
        PowerFlowState state;
        LineFlows flows;
    };

    Eval evaluate(const Eigen::VectorXd& x, bool with_jacobians) const {
        Eval e;
        e.state = to_state(x);
        e.f = sigma_ * f_raw(x);
        e.grad_f = sigma_ * grad_f_raw(x);

        const BalanceResidual br = power_balance_residual(net_, e.state, load_);
        e.c.resize(m_eq_);
        e.c.head(nb_) = br.dp;
        e.c.segment(nb_, nb_) = br.dq;
        for (std::size_t p = 0; p < pins_.size(); ++p)
            e.c[2 * nb_ + static_cast<int>(p)] = x[pins_[p].first] - pins_[p].second;

        e.flows = line_flows(net_, e.state);
        e.h.resize(m_in_);
        int hi = 0;
        for (const auto& bx : boxes_) {
            if (bx.lo > -kInf) e.h[hi++] = x[bx.x_idx] - bx.lo;
            if (bx.hi < kInf) e.h[hi++] = bx.hi - x[bx.x_idx];
        }
        for (const auto& fc : flows_) {
            const double fp = fc.from_side ? e.flows.p_from[fc.line] : e.flows.p_to[fc.line];
            const double fq = fc.from_side ? e.flows.q_from[fc.line] : e.flows.q_to[fc.line];
            e.h[hi++] = fc.s_max2 - fp * fp - fq * fq;
        }

        if (!with_jacobians) return e;

        // Equality Jacobian: balance rows (slack-theta column dropped) and
        // one unit row per pinned variable.
        const Eigen::SparseMatrix<double> full = residual_jacobian(net_, e.state);
        std::vector<Eigen::Triplet<double>> te;
        te.reserve(static_cast<std::size_t>(full.nonZeros() + pins_.size()));
        for (int col = 0; col < full.outerSize(); ++col) {
            const int red = red_of_full_[static_cast<std::size_t>(col)];
            if (red < 0) continue;
            for (Eigen::SparseMatrix<double>::InnerIterator it(full, col); it; ++it)
                te.emplace_back(static_cast<int>(it.row()), red, it.value());
        }
        for (std::size_t p = 0; p < pins_.size(); ++p)
            te.emplace_back(2 * nb_ + static_cast<int>(p), pins_[p].first, 1.0);
        e.j_eq.resize(m_eq_, nx_);
        e.j_eq.setFromTriplets(te.begin(), te.end());

        std::vector<Eigen::Triplet<double>> ti;
        int row = 0;
        for (const auto& bx : boxes_) {
            if (bx.lo > -kInf) ti.emplace_back(row++, bx.x_idx, 1.0);
            if (bx.hi < kInf) ti.emplace_back(row++, bx.x_idx, -1.0);
        }
        for (const auto& fc : flows_) {
            const auto& ln = net_.lines[static_cast<std::size_t>(fc.line)];
            const int i = net_.line_from_index(fc.line);
            const int j = net_.line_to_index(fc.line);
            const double delta = e.state.theta[i] - e.state.theta[j];
            const auto d = fc.from_side
                               ? detail::flow_deriv(ln.g, ln.b, ln.b_ch, net_.flow_model,
                                                    e.state.v[i], e.state.v[j], delta, false)
                               : detail::flow_deriv(ln.g, ln.b, ln.b_ch, net_.flow_model,
                                                    e.state.v[j], e.state.v[i], -delta, false);
            const int bi = fc.from_side ? i : j;
            const int bj = fc.from_side ? j : i;
            const int vars[4] = {x_of_v(bi), x_of_v(bj), x_of_th(bi), x_of_th(bj)};
            const Eigen::Vector4d grad = -2.0 * d.p * d.dp - 2.0 * d.q * d.dq;
            for (int a = 0; a < 4; ++a)
                if (vars[a] >= 0 && grad[a] != 0.0) ti.emplace_back(row, vars[a], grad[a]);
            ++row;
        }
        e.j_in.resize(m_in_, nx_);
        e.j_in.setFromTriplets(ti.begin(), ti.end());
        return e;
    }

    /// Hessian of the Lagrangian sigma*f - lam'c - z'h in reduced coords.
    Eigen::SparseMatrix<double> lagrangian_hessian(const Eigen::VectorXd& x,
                                                   const Eigen::VectorXd& lam,
                                                   const Eigen::VectorXd& z) const {
        const PowerFlowState state = to_state(x);
        std::vector<Eigen::Triplet<double>> full_t;

        // -lam' * d2(c): balance rows only (pins are linear).
        detail::add_balance_hessian(net_, state, -lam.head(nb_), -lam.segment(nb_, nb_), full_t);

        std::vector<Eigen::Triplet<double>> t;
        t.reserve(full_t.size() + static_cast<std::size_t>(ng_) + 16 * flows_.size());
        for (const auto& tr : full_t) {
            const int r = red_of_full_[static_cast<std::size_t>(tr.row())];
            const int c = red_of_full_[static_cast<std::size_t>(tr.col())];
            if (r >= 0 && c >= 0) t.emplace_back(r, c, tr.value());
        }

        for (int g = 0; g < ng_; ++g)
            t.emplace_back(x_of_pg(g), x_of_pg(g),
                           sigma_ * 2.0 * net_.generators[static_cast<std::size_t>(g)].cost_c2);

        // Flow limit rows: h = s2 - fp^2 - fq^2,
        // d2h = -2 (dfp dfp' + fp d2fp + dfq dfq' + fq d2fq).
        int base = 0;
        for (const auto& bx : boxes_) {
            if (bx.lo > -kInf) ++base;
            if (bx.hi < kInf) ++base;
        }
        for (std::size_t fi = 0; fi < flows_.size(); ++fi) {
            const double zk = z[base + static_cast<int>(fi)];
            if (zk == 0.0) continue;
            const auto& fc = flows_[fi];
            const auto& ln = net_.lines[static_cast<std::size_t>(fc.line)];
            const int i = net_.line_from_index(fc.line);
            const int j = net_.line_to_index(fc.line);
            const double delta = state.theta[i] - state.theta[j];
            const auto d = fc.from_side
                               ? detail::flow_deriv(ln.g, ln.b, ln.b_ch, net_.flow_model,
                                                    state.v[i], state.v[j], delta, true)
                               : detail::flow_deriv(ln.g, ln.b, ln.b_ch, net_.flow_model,
                                                    state.v[j], state.v[i], -delta, true);
            const int bi = fc.from_side ? i : j;
            const int bj = fc.from_side ? j : i;
            const int vars[4] = {x_of_v(bi), x_of_v(bj), x_of_th(bi), x_of_th(bj)};
            const Eigen::Matrix4d h2 = -2.0 * (d.dp * d.dp.transpose() + d.p * d.d2p +
                                               d.dq * d.dq.transpose() + d.q * d.d2q);
            // contribution is -z_k * d2h
            for (int a = 0; a < 4; ++a)
                for (int bcol = 0; bcol < 4; ++bcol)
                    if (vars[a] >= 0 && vars[bcol] >= 0 && h2(a, bcol) != 0.0)
                        t.emplace_back(vars[a], vars[bcol], -zk * h2(a, bcol));
        }

        Eigen::SparseMatrix<double> hess(nx_, nx_);
        hess.setFromTriplets(t.begin(), t.end());
        return hess;
    }

    OpfSolution run(const PowerFlowState& init);

    void set_sigma_from(const Eigen::VectorXd& x0) {
        const double g0 = grad_f_raw(x0).lpNorm<Eigen::Infinity>();
        sigma_ = 100.0 / std::max(100.0, g0);
    }

    const Network& net_;
    BusLoad load_;
    Eigen::VectorXd c1_;
    OpfOptions opts_;
    int nb_ = 0, ng_ = 0, nx_ = 0, slack_ = 0, m_eq_ = 0, m_in_ = 0;
    double sigma_ = 1.0;
    std::vector<int> red_of_full_;
    std::vector<std::pair<int, double>> pins_;  // (x index, pinned value)
    std::vector<BoxVar> boxes_;
    std::vector<FlowCon> flows_;
};

double fraction_to_boundary(const Eigen::VectorXd& v, const Eigen::VectorXd& dv, double tau) {
    double alpha = 1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (dv[i] < 0.0) alpha = std::min(alpha, -tau * v[i] / dv[i]);
    return alpha;
}

OpfSolution OpfIpm::run(const PowerFlowState& init) {
    Eigen::VectorXd x = from_state(init);
    for (const auto& p : pins_) x[p.first] = p.second;
    for (const auto& bx : boxes_) {
        const double margin = std::min(1e-2, 1e-3 * (bx.hi - bx.lo));
        if (bx.lo > -kInf) x[bx.x_idx] = std::max(x[bx.x_idx], bx.lo + margin);
        if (bx.hi < kInf) x[bx.x_idx] = std::min(x[bx.x_idx], bx.hi - margin);
    }
    set_sigma_from(x);

    Eval e = evaluate(x, true);
    Eigen::VectorXd s = e.h.cwiseMax(1e-2);
    Eigen::VectorXd lam = Eigen::VectorXd::Zero(m_eq_);
    Eigen::VectorXd z =
        (0.1 * s.cwiseInverse()).cwiseMax(1e-6).cwiseMin(1e6);

    double best_kkt = kInf;
    Eigen::VectorXd best_x = x;
    double nu = 1.0;
    int it = 0;
    bool converged = false;

    const double tau = 0.995;
    for (it = 0; it < opts_.max_iter; ++it) {
        const Eigen::VectorXd r_d = e.grad_f - e.j_eq.transpose() * lam - e.j_in.transpose() * z;
        const Eigen::VectorXd r_in = e.h - s;
        const Eigen::VectorXd comp = s.cwiseProduct(z);
        const double mu = m_in_ > 0 ? comp.sum() / m_in_ : 0.0;

        const double sd =
            std::max(100.0, (lam.lpNorm<1>() + z.lpNorm<1>()) /
                                std::max(1, m_eq_ + m_in_)) /
            100.0;
        const double kkt = std::max({r_d.lpNorm<Eigen::Infinity>() / sd,
                                     e.c.lpNorm<Eigen::Infinity>(),
                                     r_in.size() ? r_in.lpNorm<Eigen::Infinity>() : 0.0,
                                     comp.size() ? comp.lpNorm<Eigen::Infinity>() / sd : 0.0});
        if (std::isfinite(kkt) && kkt < best_kkt) {
            best_kkt = kkt;
            best_x = x;
        }
        if (kkt <= opts_.tol_kkt && e.c.lpNorm<Eigen::Infinity>() <= 1e-9) {
            converged = true;
            break;
        }
        if (!std::isfinite(kkt)) break;

        // KKT matrix [W JE'; JE -dc*I] with W = H + JI' (z/s) JI + dx*I.
        const Eigen::VectorXd zs = z.cwiseQuotient(s);
        Eigen::SparseMatrix<double> hess = lagrangian_hessian(x, lam, z);

        Eigen::VectorXd dx_sol, dlam, ds, dz;
        double delta_x = 0.0, delta_c = 0.0;
        bool factored = false;
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        Eigen::SparseMatrix<double> kkt_mat;
        for (int attempt = 0; attempt < 12 && !factored; ++attempt) {
            std::vector<Eigen::Triplet<double>> kt;
            kt.reserve(static_cast<std::size_t>(hess.nonZeros() + e.j_in.nonZeros() * 4 +
                                                e.j_eq.nonZeros() * 2 + nx_ + m_eq_));
            for (int col = 0; col < hess.outerSize(); ++col)
                for (Eigen::SparseMatrix<double>::InnerIterator hit(hess, col); hit; ++hit)
                    kt.emplace_back(static_cast<int>(hit.row()), col, hit.value());
            if (m_in_ > 0) {
                const Eigen::SparseMatrix<double> w2 =
                    e.j_in.transpose() * zs.asDiagonal() * e.j_in;
                for (int col = 0; col < w2.outerSize(); ++col)
                    for (Eigen::SparseMatrix<double>::InnerIterator wit(w2, col); wit; ++wit)
                        kt.emplace_back(static_cast<int>(wit.row()), col, wit.value());
            }
            for (int i = 0; i < nx_; ++i)
                if (delta_x != 0.0) kt.emplace_back(i, i, delta_x);
            for (int col = 0; col < e.j_eq.outerSize(); ++col)
                for (Eigen::SparseMatrix<double>::InnerIterator jit(e.j_eq, col); jit; ++jit) {
                    kt.emplace_back(nx_ + static_cast<int>(jit.row()), col, jit.value());
                    kt.emplace_back(col, nx_ + static_cast<int>(jit.row()), jit.value());
                }
            for (int i = 0; i < m_eq_; ++i) kt.emplace_back(nx_ + i, nx_ + i, -std::max(delta_c, 1e-12));
            kkt_mat.resize(nx_ + m_eq_, nx_ + m_eq_);
            kkt_mat.setFromTriplets(kt.begin(), kt.end());
            lu.compute(kkt_mat);
            if (lu.info() == Eigen::Success) {
                factored = true;
            } else {
                delta_x = delta_x == 0.0 ? 1e-8 : delta_x * 100.0;
                delta_c = delta_c == 0.0 ? 1e-12 : delta_c * 100.0;
            }
        }
        if (!factored) break;

        auto solve_step = [&](const Eigen::VectorXd& r_c)
            -> std::tuple<Eigen::VectorXd, Eigen::VectorXd, Eigen::VectorXd, Eigen::VectorXd> {
            Eigen::VectorXd rhs(nx_ + m_eq_);
            rhs.head(nx_) = -r_d;
            if (m_in_ > 0)
                rhs.head(nx_) -=
                    e.j_in.transpose() * ((r_c + z.cwiseProduct(r_in)).cwiseQuotient(s));
            rhs.tail(m_eq_) = -e.c;
            const Eigen::VectorXd sol = lu.solve(rhs);
            Eigen::VectorXd dxs = sol.head(nx_);
            Eigen::VectorXd dls = -sol.tail(m_eq_);
            Eigen::VectorXd dss = e.j_in * dxs + r_in;
            Eigen::VectorXd dzs = -(r_c + z.cwiseProduct(dss)).cwiseQuotient(s);
            return {dxs, dls, dss, dzs};
        };

        // Predictor (affine scaling) step.
        auto [dx_a, dl_a, ds_a, dz_a] = solve_step(comp);
        if (!dx_a.allFinite()) break;
        double sigma_c = 0.1;
        Eigen::VectorXd r_c = comp;
        if (m_in_ > 0) {
            const double a_p = fraction_to_boundary(s, ds_a, 1.0);
            const double a_d = fraction_to_boundary(z, dz_a, 1.0);
            const double mu_aff =
                (s + a_p * ds_a).dot(z + a_d * dz_a) / m_in_;
            sigma_c = std::clamp(std::pow(mu_aff / std::max(mu, 1e-16), 3.0), 1e-8, 1.0 - 1e-8);
            r_c = comp - Eigen::VectorXd::Constant(m_in_, sigma_c * mu) +
                  ds_a.cwiseProduct(dz_a);
        }

        auto [dx_c, dl_c, ds_c, dz_c] = solve_step(r_c);
        dx_sol = std::move(dx_c);
        dlam = std::move(dl_c);
        ds = std::move(ds_c);
        dz = std::move(dz_c);
        if (!dx_sol.allFinite() || (m_in_ > 0 && !dz.allFinite())) break;

        double alpha_p = m_in_ > 0 ? fraction_to_boundary(s, ds, tau) : 1.0;
        const double alpha_d = m_in_ > 0 ? fraction_to_boundary(z, dz, tau) : 1.0;

        // l1 merit backtracking on the primal step.
        const double mu_target = sigma_c * mu;
        nu = std::max({nu, 1.2 * (lam + dlam).lpNorm<Eigen::Infinity>() + 1.0,
                       1.2 * (z + alpha_d * dz).lpNorm<Eigen::Infinity>() + 1.0});
        auto merit = [&](const Eigen::VectorXd& ss, const Eval& ev) {
            double phi = ev.f;
            for (Eigen::Index i = 0; i < ss.size(); ++i) phi -= mu_target * std::log(ss[i]);
            phi += nu * (ev.c.lpNorm<1>() + (ev.h - ss).lpNorm<1>());
            return phi;
        };
        const double infeas0 = e.c.lpNorm<1>() + r_in.lpNorm<1>();
        double dphi = e.grad_f.dot(dx_sol) - nu * infeas0;
        if (m_in_ > 0) dphi -= mu_target * (ds.cwiseQuotient(s)).sum();
        const double phi0 = merit(s, e);

        double alpha = alpha_p;
        bool accepted = false;
        Eval e_trial;
        for (int ls = 0; ls < 30; ++ls) {
            const Eigen::VectorXd x_new = x + alpha * dx_sol;
            const Eigen::VectorXd s_new = m_in_ > 0 ? (s + alpha * ds).eval() : s;
            e_trial = evaluate(x_new, true);
            const bool finite = std::isfinite(e_trial.f) && e_trial.c.allFinite() &&
                                e_trial.h.allFinite();
            if (finite &&
                merit(s_new, e_trial) <= phi0 + 1e-4 * alpha * std::min(dphi, 0.0)) {
                x = x_new;
                s = s_new;
                e = std::move(e_trial);
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            // fall back to a tiny safeguarded step to keep moving
            x += 1e-10 * dx_sol;
            e = evaluate(x, true);
        }

        lam += alpha_d * dlam;
        if (m_in_ > 0) {
            z += alpha_d * dz;
            z = z.cwiseMax(1e-14);
            s = s.cwiseMax(1e-14);
        }
    }

    OpfSolution sol;
    if (!converged) {
        x = best_x;
        e = evaluate(x, false);
    }
    sol.state = to_state(x);
    sol.objective = f_raw(x);
    sol.iterations = it;
    sol.kkt_residual = best_kkt;
    if (converged) {
        sol.status = SolveStatus::converged;
    } else if (e.c.lpNorm<Eigen::Infinity>() > 1e-4) {
        sol.status = SolveStatus::infeasible;
    } else {
        sol.status = SolveStatus::max_iter;
    }
    return sol;
}

}  // namespace

OpfSolution solve_opf(const Network& net, const BusLoad& load,
                      const std::optional<Eigen::VectorXd>& c1_override,
                      const std::optional<PowerFlowState>& init, const OpfOptions& opts) {
    if (load.p.size() != net.n_buses() || load.q.size() != net.n_buses())
        throw ValidationError("load dimensions do not match the network");
    Eigen::VectorXd c1(net.n_gens());
    for (int g = 0; g < net.n_gens(); ++g)
        c1[g] = net.generators[static_cast<std::size_t>(g)].cost_c1;
    if (c1_override) {
        if (c1_override->size() != net.n_gens())
            throw ValidationError("c1 override dimension does not match generator count");
        c1 = *c1_override;
    }

    OpfIpm ipm(net, load, c1, opts);
    const PowerFlowState base = init ? *init : flat_state(net);
    OpfSolution best = ipm.run(base);

    for (int k = 1; k < opts.n_starts; ++k) {
        Philox rng(opts.seed, stream_id("opf-multistart", static_cast<std::uint64_t>(k)));
        PowerFlowState start = flat_state(net);
        for (int b = 0; b < net.n_buses(); ++b) {
            if (b != net.slack_index()) start.theta[b] += rng.uniform(-0.1, 0.1);
            const auto& bus = net.buses[static_cast<std::size_t>(b)];
            start.v[b] = std::clamp(start.v[b] + rng.uniform(-0.02, 0.02), bus.v_min, bus.v_max);
        }
        for (int g = 0; g < net.n_gens(); ++g) {
            const auto& gen = net.generators[static_cast<std::size_t>(g)];
            const double w = gen.p_max - gen.p_min;
            start.p_g[g] =
                std::clamp(start.p_g[g] + rng.uniform(-0.4, 0.4) * w, gen.p_min, gen.p_max);
        }
        const OpfSolution cand = ipm.run(start);
        const bool cand_better =
            (cand.status == SolveStatus::converged &&
             (best.status != SolveStatus::converged || cand.objective < best.objective)) ||
            (cand.status != SolveStatus::converged && best.status != SolveStatus::converged &&
             cand.kkt_residual < best.kkt_residual);
        if (cand_better) best = cand;
    }
    return best;
}

}  // namespace diffopf::acopf
