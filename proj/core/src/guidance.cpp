#include "diffopf/guidance.hpp"

#include <algorithm>
#include <cmath>

#include "diffopf/errors.hpp"
#include "diffopf/parallel.hpp"
#include "diffopf/rng.hpp"

namespace diffopf::guidance {

SignMode sign_mode_from_string(const std::string& s) {
    if (s == "corrected") return SignMode::corrected;
    if (s == "paper") return SignMode::paper;
    throw ConfigError("sign mode must be \"corrected\" or \"paper\", got \"" + s + "\"");
}

const char* to_string(SignMode m) { return m == SignMode::corrected ? "corrected" : "paper"; }

LambdaSchedule lambda_schedule_from_string(const std::string& s) {
    if (s == "constant") return LambdaSchedule::constant;
    if (s == "one_minus_alpha_bar") return LambdaSchedule::one_minus_alpha_bar;
    throw ConfigError("lambda schedule must be \"constant\" or \"one_minus_alpha_bar\"");
}

const char* to_string(LambdaSchedule s) {
    return s == LambdaSchedule::constant ? "constant" : "one_minus_alpha_bar";
}

BestCriterion criterion_from_string(const std::string& s) {
    if (s == "cost") return BestCriterion::cost;
    if (s == "voltage_violation") return BestCriterion::voltage_violation;
    if (s == "weighted") return BestCriterion::weighted;
    throw ConfigError("criterion must be cost, voltage_violation, or weighted");
}

GuidanceSpec load_guidance(const std::vector<dataset::LayoutEntry>& layout,
                           const Eigen::VectorXd& p_d, const Eigen::VectorXd& q_d,
                           double lambda, SignMode sign, LambdaSchedule sched) {
    if (!(lambda >= 0.0)) throw ConfigError("guidance lambda must be nonnegative");
    GuidanceSpec spec;
    spec.lambda = lambda;
    spec.sign_mode = sign;
    spec.lambda_schedule = sched;

    int p_seen = 0, q_seen = 0;
    std::vector<double> y;
    for (std::size_t i = 0; i < layout.size(); ++i) {
        const auto& e = layout[i];
        if (e.quantity == "p_d") {
            if (p_seen >= p_d.size()) throw ValidationError("p_d shorter than the layout");
            spec.selected_indices.push_back(static_cast<int>(i));
            y.push_back(p_d[p_seen++]);
        } else if (e.quantity == "q_d") {
            if (q_seen >= q_d.size()) throw ValidationError("q_d shorter than the layout");
            spec.selected_indices.push_back(static_cast<int>(i));
            y.push_back(q_d[q_seen++]);
        }
    }
    if (p_seen != p_d.size() || q_seen != q_d.size())
        throw ValidationError("load vectors do not match the layout's bus count");
    spec.y = Eigen::Map<Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
    return spec;
}

Eigen::VectorXd apply_A(const GuidanceSpec& spec, const Eigen::VectorXd& x) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(spec.selected_indices.size()));
    for (std::size_t k = 0; k < spec.selected_indices.size(); ++k) {
        const int idx = spec.selected_indices[k];
        if (idx < 0 || idx >= x.size()) throw ValidationError("selection index out of range");
        out[static_cast<Eigen::Index>(k)] = x[idx];
    }
    return out;
}

Eigen::VectorXd guidance_step(const Eigen::VectorXd& x0_hat, const std::vector<int>& indices,
                              const Eigen::VectorXd& y, double lambda, SignMode sign) {
    if (static_cast<Eigen::Index>(indices.size()) != y.size())
        throw ValidationError("guidance_step: y must match the selection size");
    Eigen::VectorXd out = x0_hat;
    if (lambda == 0.0) return out;
    const double s = sign == SignMode::corrected ? 1.0 : -1.0;
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const int idx = indices[k];
        out[idx] += s * lambda * (y[static_cast<Eigen::Index>(k)] - x0_hat[idx]);
    }
    return out;
}

namespace {

struct GuideCtx {
    std::vector<int> model_indices;
    Eigen::VectorXd y_norm;
    double lambda;
    SignMode sign;
    LambdaSchedule sched;
    const diffusion::NoiseSchedule* schedule;
};

void guide_hook(Eigen::VectorXd& x0_hat, int t, const void* raw) {
    const auto* ctx = static_cast<const GuideCtx*>(raw);
    double lam = ctx->lambda;
    if (ctx->sched == LambdaSchedule::one_minus_alpha_bar)
        lam *= 1.0 - ctx->schedule->alpha_bar_at(t);
    x0_hat = guidance_step(x0_hat, ctx->model_indices, ctx->y_norm, lam, ctx->sign);
}

}  // namespace

std::vector<WarmStartSample> sample_conditional(const diffusion::DiffusionModel& model,
                                                const GuidanceSpec& spec, int n,
                                                std::uint64_t seed, int workers) {
    if (n < 1) throw ConfigError("sample count must be >= 1");
    if (static_cast<Eigen::Index>(spec.selected_indices.size()) != spec.y.size())
        throw ValidationError("guidance spec: y must match the selection size");
    if (!(spec.lambda >= 0.0)) throw ConfigError("guidance lambda must be nonnegative");

    // Normalize the observation once; selected components that were
    // dropped as constant cannot be steered and are excluded from A.
    GuideCtx ctx;
    ctx.lambda = spec.lambda;
    ctx.sign = spec.sign_mode;
    ctx.sched = spec.lambda_schedule;
    ctx.schedule = &model.schedule;
    std::vector<double> y_norm;
    const auto& nz = model.normalizer;
    for (std::size_t k = 0; k < spec.selected_indices.size(); ++k) {
        const int full = spec.selected_indices[k];
        if (full < 0 || full >= nz.full_dim())
            throw ValidationError("guidance spec: selection index out of range");
        const int mi = nz.model_index_of(full);
        if (mi < 0) continue;
        ctx.model_indices.push_back(mi);
        y_norm.push_back((spec.y[static_cast<Eigen::Index>(k)] - nz.mean()[full]) /
                         nz.stddev()[full]);
    }
    ctx.y_norm =
        Eigen::Map<Eigen::VectorXd>(y_norm.data(), static_cast<Eigen::Index>(y_norm.size()));

    // Dispatch extraction positions in the layout.
    std::vector<int> pg_idx, qg_idx;
    for (std::size_t i = 0; i < model.layout.size(); ++i) {
        if (model.layout[i].quantity == "p_g") pg_idx.push_back(static_cast<int>(i));
        if (model.layout[i].quantity == "q_g") qg_idx.push_back(static_cast<int>(i));
    }

    std::vector<WarmStartSample> out(static_cast<std::size_t>(n));
    parallel_for(static_cast<std::size_t>(n), workers, [&](std::size_t i) {
        Philox rng(seed, stream_id("chain", i));
        bool finite = true;
        const Eigen::VectorXd z =
            diffusion::detail::run_chain(model, rng, &guide_hook, &ctx, &finite);
        WarmStartSample s;
        s.chain_seed = i;
        s.finite = finite;
        if (finite) {
            double r = 0.0;
            for (std::size_t k = 0; k < ctx.model_indices.size(); ++k)
                r = std::max(r, std::abs(ctx.y_norm[static_cast<Eigen::Index>(k)] -
                                         z[ctx.model_indices[k]]));
            s.residual_inf = r;
            s.x0 = nz.denormalize(z);
            s.p_g.resize(static_cast<Eigen::Index>(pg_idx.size()));
            s.q_g.resize(static_cast<Eigen::Index>(qg_idx.size()));
            for (std::size_t k = 0; k < pg_idx.size(); ++k)
                s.p_g[static_cast<Eigen::Index>(k)] = s.x0[pg_idx[k]];
            for (std::size_t k = 0; k < qg_idx.size(); ++k)
                s.q_g[static_cast<Eigen::Index>(k)] = s.x0[qg_idx[k]];
        }
        out[i] = std::move(s);
    });
    return out;
}

std::size_t best_of(const std::vector<WarmStartSample>& samples,
                    const std::vector<SampleScore>& scores, BestCriterion criterion) {
    if (samples.empty()) throw ValidationError("best_of: no samples");
    if (scores.size() != samples.size())
        throw ValidationError("best_of: scores must match samples");
    for (const auto& sc : scores)
        if (!sc.scored) throw ValidationError("best_of: unscored sample");

    double cost_lo = 0.0, cost_hi = 1.0, viol_lo = 0.0, viol_hi = 1.0;
    if (criterion == BestCriterion::weighted) {
        cost_lo = viol_lo = std::numeric_limits<double>::infinity();
        cost_hi = viol_hi = -std::numeric_limits<double>::infinity();
        for (const auto& sc : scores) {
            cost_lo = std::min(cost_lo, sc.cost);
            cost_hi = std::max(cost_hi, sc.cost);
            viol_lo = std::min(viol_lo, sc.voltage_violation);
            viol_hi = std::max(viol_hi, sc.voltage_violation);
        }
    }
    auto value = [&](const SampleScore& sc) {
        switch (criterion) {
            case BestCriterion::cost: return sc.cost;
            case BestCriterion::voltage_violation: return sc.voltage_violation;
            case BestCriterion::weighted: {
                const double c =
                    (sc.cost - cost_lo) / std::max(cost_hi - cost_lo, 1e-300);
                const double v = (sc.voltage_violation - viol_lo) /
                                 std::max(viol_hi - viol_lo, 1e-300);
                return c + v;
            }
        }
        return sc.cost;
    };

    std::size_t best = 0;
    double best_val = value(scores[0]);
    for (std::size_t i = 1; i < samples.size(); ++i) {
        const double v = value(scores[i]);
        if (v < best_val ||
            (v == best_val && samples[i].chain_seed < samples[best].chain_seed)) {
            best = i;
            best_val = v;
        }
    }
    return best;
}

}  // namespace diffopf::guidance
