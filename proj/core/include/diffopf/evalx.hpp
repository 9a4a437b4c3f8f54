#pragma once

#include <string>
#include <vector>

namespace diffopf::evalx {

/// Mean of the worst ceil(q*n) values (largest; every metric here is a
/// cost). cvar(v, 1.0) is the plain mean.
double cvar(std::vector<double> values, double q);

/// Mean over loads of the fraction of samples whose cost is within
/// eps_pct percent of that load's reference optimum.
double estimate_p_eps(const std::vector<std::vector<double>>& costs_per_load,
                      const std::vector<double>& c_star, double eps_pct);

/// Lower bound ceil(log(1 - delta) / log(1 - p_eps)) on the draws needed
/// for an eps-close sample with confidence delta. p_eps = 1 returns 1;
/// p_eps = 0 is a domain error.
long sample_complexity(double p_eps, double delta);

struct ComplexityRow {
    double epsilon_pct = 0.0;
    double p_eps = 0.0;
    double delta = 0.0;
    long m_bound = -1;         // -1 when p_eps = 0 (no finite bound)
    long n_eps_observed = 0;   // eps-close samples among the first m_bound draws,
                               // averaged over loads and rounded
};

/// One row per (eps, delta) pair; sample costs must come in draw order
/// and every load must have the same count.
std::vector<ComplexityRow> complexity_table(const std::vector<std::vector<double>>& costs_per_load,
                                            const std::vector<double>& c_star,
                                            const std::vector<double>& epsilons,
                                            const std::vector<double>& deltas);

std::string complexity_csv(const std::vector<ComplexityRow>& rows);
std::string complexity_text(const std::vector<ComplexityRow>& rows);

// ---------------------------------------------------------------------------
// Warm-start comparison tables

struct ScoredWarmStart {
    double optimality_gap = 0.0;
    double optimality_gap_pct = 0.0;
    double setpoint_error = 0.0;
    double voltage_violation = 0.0;
    double cost = 0.0;  // restored dispatch cost
};

struct MetricStats {
    double mean = 0.0;
    double cvar10 = 0.0;
};

struct SolverSummary {
    MetricStats gap, gap_pct, setpoint_error, voltage_violation;
};

/// Per-load best-of-N selection (independently per metric), then mean and
/// CVaR_10% across loads.
SolverSummary summarize_best_of(const std::vector<std::vector<ScoredWarmStart>>& per_load);

/// Single score per load (point predictors).
SolverSummary summarize_single(const std::vector<ScoredWarmStart>& per_load);

struct WarmstartTable {
    SolverSummary diffusion;
    SolverSummary baseline;
    int n_loads = 0;
};

WarmstartTable warmstart_table(const std::vector<std::vector<ScoredWarmStart>>& diff_per_load,
                               const std::vector<ScoredWarmStart>& base_per_load);

std::string warmstart_csv(const WarmstartTable& t);
std::string warmstart_text(const WarmstartTable& t);

}  // namespace diffopf::evalx
