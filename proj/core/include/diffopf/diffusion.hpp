#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "diffopf/dataset.hpp"
#include "diffopf/nnet.hpp"

namespace diffopf::diffusion {

/// Scale mode of the reverse-update noise term. The quantity
/// beta_t (1 - abar_{t-1}) / (1 - abar_t) is a variance; `ddpm` takes its
/// square root as the noise scale, `paper` uses it verbatim.
enum class StdMode { ddpm, paper };
enum class ScheduleShape { linear, cosine };

StdMode std_mode_from_string(const std::string& s);
const char* to_string(StdMode m);
ScheduleShape shape_from_string(const std::string& s);
const char* to_string(ScheduleShape s);

struct NoiseSchedule {
    int T = 0;
    // Index 0 corresponds to t = 1.
    Eigen::VectorXd beta, alpha, alpha_bar, sigma;
    StdMode std_mode = StdMode::ddpm;

    /// abar(0) = 1 by convention; valid for 0 <= t <= T.
    double alpha_bar_at(int t) const { return t == 0 ? 1.0 : alpha_bar[t - 1]; }
    double beta_at(int t) const { return beta[t - 1]; }
    double sigma_at(int t) const { return sigma[t - 1]; }

    /// Whether the terminal marginal is close enough to the standard
    /// normal for training (abar_T <= 1e-3).
    bool terminal_ok() const { return T > 0 && alpha_bar[T - 1] <= 1e-3; }
};

/// For `cosine`, betas follow the squared-cosine profile capped at 0.999
/// and the (beta_start, beta_end) arguments only get range-validated.
NoiseSchedule make_schedule(int T, double beta_start, double beta_end,
                            ScheduleShape shape = ScheduleShape::linear,
                            StdMode std_mode = StdMode::ddpm);

/// z_t = sqrt(abar_t) z0 + sqrt(1 - abar_t) eps.
Eigen::VectorXd forward_perturb(const NoiseSchedule& s, const Eigen::VectorXd& z0, int t,
                                const Eigen::VectorXd& eps);

/// score = -eps_hat / sqrt(1 - abar_t).
Eigen::VectorXd score_from_noise(const NoiseSchedule& s, const Eigen::VectorXd& eps_hat, int t);

/// Clean-sample estimate: (x_t + (1 - abar_t) * score) / sqrt(abar_t).
Eigen::VectorXd clean_estimate(const NoiseSchedule& s, const Eigen::VectorXd& x_t,
                               const Eigen::VectorXd& score, int t);

struct DiffusionModel {
    NoiseSchedule schedule;
    nnet::Mlp predictor;  // input = model dim + embedding dim
    int emb_dim = 64;
    double emb_base = 1000.0;
    dataset::Normalizer normalizer;
    std::vector<dataset::LayoutEntry> layout;

    int model_dim() const { return normalizer.model_dim(); }

    /// eps_theta for a batch of normalized states; t is per row.
    Eigen::MatrixXd predict_noise(const Eigen::MatrixXd& z, const std::vector<int>& t) const;
};

struct TrainConfig {
    int T = 200;
    double beta_start = 1e-4;
    double beta_end = 0.08;
    ScheduleShape shape = ScheduleShape::linear;
    StdMode std_mode = StdMode::ddpm;
    std::vector<int> hidden = {256, 256, 256};
    int emb_dim = 64;
    double emb_base = 1000.0;
    nnet::AdamConfig adam;
    int batch = 128;
    int epochs = 200;
    std::uint64_t seed = 0;
    bool allow_high_terminal_alpha_bar = false;
    /// When set, used instead of fitting on the data (degenerate sets
    /// such as a single repeated record have no fittable moments).
    const dataset::Normalizer* normalizer = nullptr;
};

/// Fits the normalizer on the raw joint records, then runs the denoising
/// training loop: per step sample a batch of x0, per-sample uniform t,
/// Gaussian eps, and an Adam step on the noise-prediction MSE.
/// loss_history (one entry per epoch, mean per-batch loss) is optional.
DiffusionModel train(const Eigen::MatrixXd& x0_raw,
                     const std::vector<dataset::LayoutEntry>& layout, const TrainConfig& cfg,
                     std::vector<double>* loss_history = nullptr);

/// Ancestral sampling: n independent reverse chains from pure noise, each
/// on its own (seed, chain) stream; returns denormalized joint records,
/// one per row. Identical results for any worker count.
Eigen::MatrixXd sample(const DiffusionModel& model, int n, std::uint64_t seed, int workers = 1);

// Shared single-chain step used by the unconditional and guided samplers.
// Applies x0_hook (may be null) to the clean estimate before the reverse
// update.
namespace detail {

using X0Hook = void (*)(Eigen::VectorXd&, int, const void*);

Eigen::VectorXd run_chain(const DiffusionModel& model, Philox& rng, X0Hook hook,
                          const void* hook_ctx, bool* finite_ok);

}  // namespace detail

}  // namespace diffopf::diffusion
