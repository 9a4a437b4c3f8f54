#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "diffopf/grid.hpp"

namespace diffopf::acopf {

struct PowerFlowState {
    Eigen::VectorXd v;      // per-bus voltage magnitude [p.u.]
    Eigen::VectorXd theta;  // per-bus angle [rad], slack fixed at 0
    Eigen::VectorXd p_g;    // per-generator active dispatch [p.u.]
    Eigen::VectorXd q_g;    // per-generator reactive dispatch [p.u.]
};

/// Flat start: v = 1 clamped into bounds, theta = 0, dispatch at bound
/// midpoints.
PowerFlowState flat_state(const grid::Network& net);

enum class SolveStatus { converged, max_iter, infeasible };
const char* to_string(SolveStatus s);
SolveStatus solve_status_from_string(const std::string& s);

struct OpfSolution {
    PowerFlowState state;
    double objective = 0.0;
    SolveStatus status = SolveStatus::max_iter;
    double kkt_residual = 0.0;
    int iterations = 0;
};

struct BusLoad {
    Eigen::VectorXd p, q;  // per bus
};

/// Flows for both orientations of every line.
struct LineFlows {
    Eigen::VectorXd p_from, q_from;  // i -> j
    Eigen::VectorXd p_to, q_to;      // j -> i
};

LineFlows line_flows(const grid::Network& net, const PowerFlowState& state);
LineFlows line_flows(const grid::Network& net, const PowerFlowState& state,
                     grid::FlowModel model);

/// Per-bus (dP, dQ) balance residual: generation minus demand minus shunt
/// consumption minus outgoing flows. Zero iff the state is balanced.
struct BalanceResidual {
    Eigen::VectorXd dp, dq;
};

BalanceResidual power_balance_residual(const grid::Network& net, const PowerFlowState& state,
                                       const BusLoad& load);

/// Analytic Jacobian of the stacked residual [dp; dq] with respect to the
/// stacked variables [v(nb); theta(nb); p_g(ng); q_g(ng)].
Eigen::SparseMatrix<double> residual_jacobian(const grid::Network& net,
                                              const PowerFlowState& state);

/// Total generation cost; c1_override replaces the linear coefficients.
double objective(const grid::Network& net, const Eigen::VectorXd& p_g,
                 const Eigen::VectorXd* c1_override = nullptr);

// ---------------------------------------------------------------------------
// Newton power flow

enum class BusKind { slack, pv, pq };

struct PowerFlowSpec {
    std::vector<BusKind> kind;  // per bus
    Eigen::VectorXd v_set;      // per bus; used at slack and pv buses
    Eigen::VectorXd p_gen;      // per bus specified generation; used at pv and pq buses
    Eigen::VectorXd q_gen;      // per bus specified generation; used at pq buses
};

/// PV/slack setup with every generator bus held at v_set and a given
/// per-generator active dispatch (ignored at the slack bus).
PowerFlowSpec pv_spec(const grid::Network& net, const Eigen::VectorXd& p_g, double v_set = 1.0);

struct PowerFlowOptions {
    double tol = 1e-10;  // infinity norm of the mismatch
    int max_iter = 60;
};

struct PowerFlowResult {
    PowerFlowState state;       // dispatch distributed evenly over co-located generators
    Eigen::VectorXd bus_p_gen;  // recovered bus-level generation
    Eigen::VectorXd bus_q_gen;
    SolveStatus status = SolveStatus::max_iter;
    double max_mismatch = 0.0;
    int iterations = 0;
};

PowerFlowResult solve_powerflow(const grid::Network& net, const BusLoad& load,
                                const PowerFlowSpec& spec,
                                const PowerFlowOptions& opts = {});

// ---------------------------------------------------------------------------
// AC-OPF interior-point solver

struct OpfOptions {
    double tol_kkt = 1e-6;
    double tol_feas = 1e-6;
    int max_iter = 200;
    bool enforce_flow_limits = true;
    int n_starts = 1;       // perturbed flat starts; best converged objective wins
    std::uint64_t seed = 0; // drives the multi-start perturbations only
};

OpfSolution solve_opf(const grid::Network& net, const BusLoad& load,
                      const std::optional<Eigen::VectorXd>& c1_override = std::nullopt,
                      const std::optional<PowerFlowState>& init = std::nullopt,
                      const OpfOptions& opts = {});

// ---------------------------------------------------------------------------
// Shared derivative kernels (used by the solvers and the restoration
// module). Local variable order is (v_i, v_j, theta_i, theta_j).

namespace detail {

struct FlowDeriv {
    double p = 0.0, q = 0.0;
    Eigen::Vector4d dp, dq;
    Eigen::Matrix4d d2p, d2q;
};

/// Derivatives of the i->j flow of one line; swap (v_i, v_j) and negate
/// delta for the reverse orientation.
FlowDeriv flow_deriv(double g, double b, double b_ch, grid::FlowModel model, double v_i,
                     double v_j, double delta, bool with_hessian);

/// Index map from network quantities to the stacked variable vector
/// [v; theta; p_g; q_g] used by residual_jacobian.
struct VarMap {
    int nb = 0, ng = 0;
    int v(int bus) const { return bus; }
    int th(int bus) const { return nb + bus; }
    int pg(int gen) const { return 2 * nb + gen; }
    int qg(int gen) const { return 2 * nb + ng + gen; }
    int size() const { return 2 * nb + 2 * ng; }
};

/// Adds w_p' * d2(dp) + w_q' * d2(dq) of the balance residuals to the
/// triplet list, in VarMap coordinates.
void add_balance_hessian(const grid::Network& net, const PowerFlowState& state,
                         const Eigen::VectorXd& w_p, const Eigen::VectorXd& w_q,
                         std::vector<Eigen::Triplet<double>>& out);

}  // namespace detail

}  // namespace diffopf::acopf
