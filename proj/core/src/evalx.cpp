#include "diffopf/evalx.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "diffopf/errors.hpp"

namespace diffopf::evalx {

double cvar(std::vector<double> values, double q) {
    if (values.empty()) throw ValidationError("cvar: empty input");
    if (!(q > 0.0) || q > 1.0) throw ConfigError("cvar: tail fraction must be in (0, 1]");
    const std::size_t k = static_cast<std::size_t>(
        std::ceil(q * static_cast<double>(values.size())));
    std::sort(values.begin(), values.end(), std::greater<double>());
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) sum += values[i];
    return sum / static_cast<double>(k);
}

double estimate_p_eps(const std::vector<std::vector<double>>& costs_per_load,
                      const std::vector<double>& c_star, double eps_pct) {
    if (costs_per_load.empty()) throw ValidationError("estimate_p_eps: no loads");
    if (c_star.size() != costs_per_load.size())
        throw ValidationError("estimate_p_eps: missing reference cost for some load");
    const std::size_t per = costs_per_load.front().size();
    double total = 0.0;
    for (std::size_t i = 0; i < costs_per_load.size(); ++i) {
        if (costs_per_load[i].size() != per)
            throw ValidationError("estimate_p_eps: every load needs the same sample count");
        if (per == 0) throw ValidationError("estimate_p_eps: empty sample set");
        const double limit = c_star[i] * (1.0 + eps_pct / 100.0);
        std::size_t close = 0;
        for (double c : costs_per_load[i])
            if (c <= limit) ++close;
        total += static_cast<double>(close) / static_cast<double>(per);
    }
    return total / static_cast<double>(costs_per_load.size());
}

long sample_complexity(double p_eps, double delta) {
    if (!(delta > 0.0) || !(delta < 1.0))
        throw ConfigError("sample_complexity: delta must be in (0, 1)");
    if (p_eps == 1.0) return 1;
    if (!(p_eps > 0.0) || p_eps > 1.0)
        throw ConfigError("sample_complexity: p_eps must be in (0, 1]");
    const double ratio = std::log1p(-delta) / std::log1p(-p_eps);
    const long m = static_cast<long>(std::ceil(ratio));
    return std::max(m, 1L);
}

std::vector<ComplexityRow> complexity_table(
    const std::vector<std::vector<double>>& costs_per_load, const std::vector<double>& c_star,
    const std::vector<double>& epsilons, const std::vector<double>& deltas) {
    std::vector<ComplexityRow> rows;
    for (double eps : epsilons) {
        const double p = estimate_p_eps(costs_per_load, c_star, eps);
        for (double delta : deltas) {
            ComplexityRow row;
            row.epsilon_pct = eps;
            row.p_eps = p;
            row.delta = delta;
            if (p > 0.0) {
                row.m_bound = sample_complexity(p, delta);
                // eps-close count among the first m_bound draws, averaged
                // over loads.
                double total = 0.0;
                for (std::size_t i = 0; i < costs_per_load.size(); ++i) {
                    const double limit = c_star[i] * (1.0 + eps / 100.0);
                    const std::size_t m = std::min<std::size_t>(
                        static_cast<std::size_t>(row.m_bound), costs_per_load[i].size());
                    std::size_t close = 0;
                    for (std::size_t s = 0; s < m; ++s)
                        if (costs_per_load[i][s] <= limit) ++close;
                    total += static_cast<double>(close);
                }
                row.n_eps_observed =
                    std::lround(total / static_cast<double>(costs_per_load.size()));
            }
            rows.push_back(row);
        }
    }
    return rows;
}

namespace {

std::string fmt(double v, const char* spec = "%.6g") {
    char buf[48];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

}  // namespace

std::string complexity_csv(const std::vector<ComplexityRow>& rows) {
    std::ostringstream out;
    out << "epsilon_pct,p_eps,delta,m_bound,n_eps_observed\n";
    for (const auto& r : rows) {
        out << fmt(r.epsilon_pct) << "," << fmt(r.p_eps) << "," << fmt(r.delta) << ",";
        if (r.m_bound >= 0)
            out << r.m_bound;
        else
            out << "inf";
        out << "," << r.n_eps_observed << "\n";
    }
    return out.str();
}

std::string complexity_text(const std::vector<ComplexityRow>& rows) {
    std::ostringstream out;
    char line[160];
    std::snprintf(line, sizeof(line), "%10s %10s %8s %8s %8s\n", "eps[%]", "p_eps", "delta",
                  "M", "N_eps");
    out << line;
    for (const auto& r : rows) {
        std::string m = r.m_bound >= 0 ? std::to_string(r.m_bound) : "inf";
        std::snprintf(line, sizeof(line), "%10.3g %10.4g %8.3g %8s %8ld\n", r.epsilon_pct,
                      r.p_eps, r.delta, m.c_str(), r.n_eps_observed);
        out << line;
    }
    return out.str();
}

// ---------------------------------------------------------------------------

namespace {

MetricStats stats_of(std::vector<double> values) {
    MetricStats s;
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    s.cvar10 = cvar(std::move(values), 0.1);
    return s;
}

}  // namespace

SolverSummary summarize_best_of(const std::vector<std::vector<ScoredWarmStart>>& per_load) {
    if (per_load.empty()) throw ValidationError("summarize: no loads");
    std::vector<double> gap, gap_pct, err, viol;
    for (const auto& samples : per_load) {
        if (samples.empty()) throw ValidationError("summarize: load with no samples");
        double g = samples[0].optimality_gap, gp = samples[0].optimality_gap_pct;
        double e = samples[0].setpoint_error, v = samples[0].voltage_violation;
        for (const auto& s : samples) {
            if (s.optimality_gap < g) {
                g = s.optimality_gap;
                gp = s.optimality_gap_pct;
            }
            e = std::min(e, s.setpoint_error);
            v = std::min(v, s.voltage_violation);
        }
        gap.push_back(g);
        gap_pct.push_back(gp);
        err.push_back(e);
        viol.push_back(v);
    }
    SolverSummary s;
    s.gap = stats_of(gap);
    s.gap_pct = stats_of(gap_pct);
    s.setpoint_error = stats_of(err);
    s.voltage_violation = stats_of(viol);
    return s;
}

SolverSummary summarize_single(const std::vector<ScoredWarmStart>& per_load) {
    if (per_load.empty()) throw ValidationError("summarize: no loads");
    std::vector<double> gap, gap_pct, err, viol;
    for (const auto& s : per_load) {
        gap.push_back(s.optimality_gap);
        gap_pct.push_back(s.optimality_gap_pct);
        err.push_back(s.setpoint_error);
        viol.push_back(s.voltage_violation);
    }
    SolverSummary out;
    out.gap = stats_of(gap);
    out.gap_pct = stats_of(gap_pct);
    out.setpoint_error = stats_of(err);
    out.voltage_violation = stats_of(viol);
    return out;
}

WarmstartTable warmstart_table(const std::vector<std::vector<ScoredWarmStart>>& diff_per_load,
                               const std::vector<ScoredWarmStart>& base_per_load) {
    if (diff_per_load.size() != base_per_load.size())
        throw ValidationError("warmstart_table: solvers scored on different load sets");
    WarmstartTable t;
    t.n_loads = static_cast<int>(diff_per_load.size());
    t.diffusion = summarize_best_of(diff_per_load);
    t.baseline = summarize_single(base_per_load);
    return t;
}

std::string warmstart_csv(const WarmstartTable& t) {
    std::ostringstream out;
    out << "solver,gap_mean,gap_cvar10,gap_pct_mean,gap_pct_cvar10,"
           "setpoint_err_mean,setpoint_err_cvar10,violation_mean,violation_cvar10\n";
    auto row = [&](const char* name, const SolverSummary& s) {
        out << name << "," << fmt(s.gap.mean) << "," << fmt(s.gap.cvar10) << ","
            << fmt(s.gap_pct.mean) << "," << fmt(s.gap_pct.cvar10) << ","
            << fmt(s.setpoint_error.mean) << "," << fmt(s.setpoint_error.cvar10) << ","
            << fmt(s.voltage_violation.mean) << "," << fmt(s.voltage_violation.cvar10) << "\n";
    };
    row("diffopf", t.diffusion);
    row("baseline", t.baseline);
    return out.str();
}

std::string warmstart_text(const WarmstartTable& t) {
    std::ostringstream out;
    char line[240];
    std::snprintf(line, sizeof(line), "%-10s %12s %12s %12s %12s %12s %12s\n", "solver",
                  "gap mean", "gap cvar10", "err mean", "err cvar10", "viol mean",
                  "viol cvar10");
    out << line;
    auto row = [&](const char* name, const SolverSummary& s) {
        std::snprintf(line, sizeof(line),
                      "%-10s %9.2f (%4.1f%%) %4.2f (%4.1f%%) %12.5f %12.5f %12.5f %12.5f\n",
                      name, s.gap.mean, s.gap_pct.mean, s.gap.cvar10, s.gap_pct.cvar10,
                      s.setpoint_error.mean, s.setpoint_error.cvar10,
                      s.voltage_violation.mean, s.voltage_violation.cvar10);
        out << line;
    };
    row("diffopf", t.diffusion);
    row("baseline", t.baseline);
    return out.str();
}

}  // namespace diffopf::evalx
