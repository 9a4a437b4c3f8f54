#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace diffopf::nnet {

/// Sinusoidal embedding of t/T with geometrically spaced frequencies.
/// Components stay in [-1, 1]; requires 1 <= t <= T.
Eigen::VectorXd time_embed(int t, int T, int dim, double base = 1000.0);

struct MlpSpec {
    int input_dim = 0;
    std::vector<int> hidden;
    int output_dim = 0;
    std::string activation = "silu";  // x * sigmoid(x) on hidden layers
};

/// Dense network with a linear output head. Rows of a batch are samples.
class Mlp {
public:
    Mlp() = default;
    explicit Mlp(const MlpSpec& spec);  // zero-initialized

    /// Xavier-normal hidden layers; the output head is scaled by
    /// head_scale so a fresh model predicts near zero.
    static Mlp random_init(const MlpSpec& spec, std::uint64_t seed, double head_scale = 1e-2);

    const MlpSpec& spec() const { return spec_; }
    int n_layers() const { return static_cast<int>(w_.size()); }
    long n_params() const;

    std::vector<Eigen::MatrixXd>& weights() { return w_; }
    std::vector<Eigen::VectorXd>& biases() { return b_; }
    const std::vector<Eigen::MatrixXd>& weights() const { return w_; }
    const std::vector<Eigen::VectorXd>& biases() const { return b_; }

    Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;

    struct Gradients {
        std::vector<Eigen::MatrixXd> w;
        std::vector<Eigen::VectorXd> b;
        double loss = 0.0;  // mean over the batch of ||target - output||^2
    };

    /// Analytic gradient of the mean squared-norm loss over the batch.
    Gradients backward(const Eigen::MatrixXd& x, const Eigen::MatrixXd& target) const;

private:
    MlpSpec spec_;
    std::vector<Eigen::MatrixXd> w_;  // (out x in) per layer
    std::vector<Eigen::VectorXd> b_;
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<Eigen::MatrixXd> m_w, v_w;
    std::vector<Eigen::VectorXd> m_b, v_b;
    long step = 0;

    static AdamState init_for(const Mlp& model);
};

/// Standard Adam update with bias correction, applied in place.
void adam_step(AdamState& state, Mlp& model, const Mlp::Gradients& grads,
               const AdamConfig& cfg);

}  // namespace diffopf::nnet
