#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "diffopf/dataset.hpp"
#include "diffopf/nnet.hpp"

namespace diffopf::baseline {

/// Single-valued load-to-dispatch regressor sharing the joint-record
/// normalizer with the diffusion model; trained on the same split it
/// predicts the conditional mean of dispatch given loads.
struct PointPredictor {
    nnet::Mlp mlp;  // retained load dims -> retained dispatch dims
    dataset::Normalizer normalizer;
    std::vector<dataset::LayoutEntry> layout;
    std::vector<int> load_model_idx;      // model-space inputs
    std::vector<int> dispatch_model_idx;  // model-space outputs

    /// Denormalized (p_g, q_g) for a raw per-bus load.
    std::pair<Eigen::VectorXd, Eigen::VectorXd> predict(const Eigen::VectorXd& p_d,
                                                        const Eigen::VectorXd& q_d) const;
};

struct BaselineTrainConfig {
    std::vector<int> hidden = {256, 256, 256};
    nnet::AdamConfig adam;
    int batch = 128;
    int epochs = 200;
    std::uint64_t seed = 0;
};

PointPredictor train_baseline(const Eigen::MatrixXd& x0_raw,
                              const std::vector<dataset::LayoutEntry>& layout,
                              const BaselineTrainConfig& cfg,
                              std::vector<double>* loss_history = nullptr);

}  // namespace diffopf::baseline
