#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "diffopf/diffusion.hpp"

namespace diffopf::guidance {

/// Sign of the measurement-consistency correction. `corrected` moves the
/// clean estimate toward the observation; `paper` applies the opposite
/// (printed) sign and is kept for fidelity experiments.
enum class SignMode { corrected, paper };
enum class LambdaSchedule { constant, one_minus_alpha_bar };

SignMode sign_mode_from_string(const std::string& s);
const char* to_string(SignMode m);
LambdaSchedule lambda_schedule_from_string(const std::string& s);
const char* to_string(LambdaSchedule s);

/// Selection operator A as an index set over x0, the observed loads y in
/// the same order, and the guidance scale.
struct GuidanceSpec {
    std::vector<int> selected_indices;  // x0 positions of (p_d, q_d)
    Eigen::VectorXd y;                  // raw (unnormalized) observation
    double lambda = 1.0;
    SignMode sign_mode = SignMode::corrected;
    LambdaSchedule lambda_schedule = LambdaSchedule::constant;
};

/// Builds the spec for observing every load dimension of the layout.
GuidanceSpec load_guidance(const std::vector<dataset::LayoutEntry>& layout,
                           const Eigen::VectorXd& p_d, const Eigen::VectorXd& q_d,
                           double lambda = 1.0, SignMode sign = SignMode::corrected,
                           LambdaSchedule sched = LambdaSchedule::constant);

/// y = A x: gathers the selected components.
Eigen::VectorXd apply_A(const GuidanceSpec& spec, const Eigen::VectorXd& x);

/// One guidance update on a clean estimate living in any consistent
/// space: out = x0_hat +/- lambda * A'(y - A x0_hat). Unselected
/// components are returned bit-identical.
Eigen::VectorXd guidance_step(const Eigen::VectorXd& x0_hat, const std::vector<int>& indices,
                              const Eigen::VectorXd& y, double lambda, SignMode sign);

struct WarmStartSample {
    Eigen::VectorXd p_g, q_g;   // denormalized dispatch
    Eigen::VectorXd x0;         // full denormalized record
    std::uint64_t chain_seed = 0;
    double residual_inf = 0.0;  // ||y - A x0||_inf, normalized units, retained dims
    bool finite = true;
};

/// Guided reverse chains: per step, estimate the clean sample, apply the
/// guidance correction in normalized space, then take the reverse update.
/// With lambda = 0 every chain coincides exactly with the unconditional
/// sampler at the same seed.
std::vector<WarmStartSample> sample_conditional(const diffusion::DiffusionModel& model,
                                                const GuidanceSpec& spec, int n,
                                                std::uint64_t seed, int workers = 1);

enum class BestCriterion { cost, voltage_violation, weighted };
BestCriterion criterion_from_string(const std::string& s);

/// Scores attached to samples by the restoration module.
struct SampleScore {
    double cost = 0.0;               // restored dispatch cost
    double voltage_violation = 0.0;
    bool scored = false;
};

/// Argmin by criterion; `weighted` uses the sum of min-max normalized
/// cost and violation. Ties break toward the lowest chain seed.
std::size_t best_of(const std::vector<WarmStartSample>& samples,
                    const std::vector<SampleScore>& scores, BestCriterion criterion);

}  // namespace diffopf::guidance
