#pragma once

#include <Eigen/Core>

#include "diffopf/acopf.hpp"
#include "diffopf/dataset.hpp"
#include "diffopf/grid.hpp"

namespace diffopf::restore {

struct RestorationResult {
    acopf::PowerFlowState state;       // (p~, q~, v~, theta~)
    double projection_objective = 0.0; // ||p~ - p_w||^2 + ||q~ - q_w||^2
    acopf::SolveStatus status = acopf::SolveStatus::max_iter;
    int iterations = 0;
    double balance_residual_inf = 0.0;
};

struct RestoreOptions {
    double tol_balance = 1e-10;
    int max_outer = 60;
    int max_inner = 120;
    double rho0 = 1e4;
    double rho_max = 1e12;
};

/// Projects a warm-start dispatch onto the power-flow manifold: the
/// closest (p~, q~) in least squares subject to the balance equations,
/// with voltages free (no operating limits enforced) and initialized at
/// nominal (v = 1, theta = 0). Augmented-Lagrangian outer loop with
/// Gauss-Newton inner steps.
RestorationResult restore(const grid::Network& net, const acopf::BusLoad& load,
                          const Eigen::VectorXd& p_g_warm, const Eigen::VectorXd& q_g_warm,
                          const RestoreOptions& opts = {});

struct WarmStartScore {
    double optimality_gap = 0.0;      // |c(p~) - c(p*)| in $
    double optimality_gap_pct = 0.0;  // relative to c(p*)
    double setpoint_error = 0.0;      // squared distance warm -> restored dispatch
    double voltage_violation = 0.0;   // l2 norms of upper and lower overruns
};

/// The three warm-start metrics against a ground-truth record; costs are
/// evaluated with the record's realized cost coefficients.
WarmStartScore score(const grid::Network& net, const dataset::OpfRecord& truth,
                     const RestorationResult& result, const Eigen::VectorXd& p_g_warm,
                     const Eigen::VectorXd& q_g_warm);

/// Restored dispatch cost under the record's realized coefficients.
double restored_cost(const grid::Network& net, const dataset::OpfRecord& truth,
                     const RestorationResult& result);

}  // namespace diffopf::restore
