#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "diffopf/acopf.hpp"
#include "diffopf/grid.hpp"

namespace testsup {

std::string case_path(const std::string& name);

diffopf::grid::Network load_named_case(const std::string& name);

/// Central-difference Jacobian of the stacked balance residual [dp; dq]
/// over the stacked variables [v; theta; p_g; q_g].
Eigen::MatrixXd fd_balance_jacobian(const diffopf::grid::Network& net,
                                    const diffopf::acopf::PowerFlowState& state,
                                    const diffopf::acopf::BusLoad& load, double h = 1e-6);

/// Max relative deviation between two matrices, entries below `floor`
/// compared absolutely.
double max_rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double floor = 1e-6);

/// Exhaustive OPF oracle for two-generator cases with one generator at
/// the slack bus: grid-search the other generator's active power at the
/// given resolution, close each candidate with a Newton power flow at
/// pinned generator voltages, discard infeasible candidates, and return
/// the cheapest objective found.
struct BruteForceResult {
    double objective = 0.0;
    double p_other = 0.0;
    bool found = false;
};
BruteForceResult brute_force_opf(const diffopf::grid::Network& net,
                                 const diffopf::acopf::BusLoad& load,
                                 const Eigen::VectorXd& c1, double resolution = 1e-3);

/// Kolmogorov-Smirnov statistic of samples against a CDF.
double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf);

}  // namespace testsup
