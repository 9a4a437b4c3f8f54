#include "diffopf/nnet.hpp"

#include <cmath>

#include "diffopf/errors.hpp"
#include "diffopf/rng.hpp"

namespace diffopf::nnet {

Eigen::VectorXd time_embed(int t, int T, int dim, double base) {
    if (t < 1 || t > T)
        throw ConfigError("time_embed: t must satisfy 1 <= t <= T, got t=" + std::to_string(t) +
                          ", T=" + std::to_string(T));
    if (dim < 2 || dim % 2 != 0) throw ConfigError("time_embed: dim must be even and >= 2");
    const int half = dim / 2;
    const double tau = static_cast<double>(t) / static_cast<double>(T);
    Eigen::VectorXd e(dim);
    for (int k = 0; k < half; ++k) {
        const double freq =
            half > 1 ? std::pow(base, static_cast<double>(k) / (half - 1)) : 1.0;
        const double angle = 2.0 * M_PI * tau * freq;
        e[2 * k] = std::sin(angle);
        e[2 * k + 1] = std::cos(angle);
    }
    return e;
}

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void activate(Eigen::MatrixXd& z) {
    z = z.unaryExpr([](double x) { return x * sigmoid(x); });
}

Eigen::MatrixXd activate_grad(const Eigen::MatrixXd& z) {
    return z.unaryExpr([](double x) {
        const double s = sigmoid(x);
        return s * (1.0 + x * (1.0 - s));
    });
}

}  // namespace

Mlp::Mlp(const MlpSpec& spec) : spec_(spec) {
    if (spec.input_dim < 1 || spec.output_dim < 1)
        throw ConfigError("mlp: input and output dimensions must be positive");
    if (spec.activation != "silu")
        throw ConfigError("mlp: unsupported activation '" + spec.activation + "'");
    int in = spec.input_dim;
    for (int h : spec.hidden) {
        if (h < 1) throw ConfigError("mlp: hidden width must be positive");
        w_.emplace_back(Eigen::MatrixXd::Zero(h, in));
        b_.emplace_back(Eigen::VectorXd::Zero(h));
        in = h;
    }
    w_.emplace_back(Eigen::MatrixXd::Zero(spec.output_dim, in));
    b_.emplace_back(Eigen::VectorXd::Zero(spec.output_dim));
}

Mlp Mlp::random_init(const MlpSpec& spec, std::uint64_t seed, double head_scale) {
    Mlp m(spec);
    for (std::size_t l = 0; l < m.w_.size(); ++l) {
        Philox rng(seed, stream_id("mlp-init", l));
        auto& w = m.w_[l];
        const double fan_in = static_cast<double>(w.cols());
        const double fan_out = static_cast<double>(w.rows());
        double scale = std::sqrt(2.0 / (fan_in + fan_out));
        if (l + 1 == m.w_.size()) scale *= head_scale;
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = scale * rng.normal();
    }
    return m;
}

long Mlp::n_params() const {
    long n = 0;
    for (std::size_t l = 0; l < w_.size(); ++l) n += w_[l].size() + b_[l].size();
    return n;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x) const {
    if (x.cols() != spec_.input_dim)
        throw ValidationError("mlp forward: input dimension mismatch");
    Eigen::MatrixXd a = x;
    for (std::size_t l = 0; l < w_.size(); ++l) {
        Eigen::MatrixXd z = a * w_[l].transpose();
        z.rowwise() += b_[l].transpose();
        if (l + 1 < w_.size()) activate(z);
        a = std::move(z);
    }
    return a;
}

Mlp::Gradients Mlp::backward(const Eigen::MatrixXd& x, const Eigen::MatrixXd& target) const {
    if (x.rows() == 0) throw ValidationError("mlp backward: empty batch");
    if (x.cols() != spec_.input_dim || target.cols() != spec_.output_dim ||
        target.rows() != x.rows())
        throw ValidationError("mlp backward: dimension mismatch");

    const std::size_t n_layers = w_.size();
    std::vector<Eigen::MatrixXd> acts(n_layers + 1);  // layer inputs
    std::vector<Eigen::MatrixXd> pre(n_layers);       // pre-activations
    acts[0] = x;
    for (std::size_t l = 0; l < n_layers; ++l) {
        pre[l] = acts[l] * w_[l].transpose();
        pre[l].rowwise() += b_[l].transpose();
        Eigen::MatrixXd a = pre[l];
        if (l + 1 < n_layers) activate(a);
        acts[l + 1] = std::move(a);
    }

    Gradients g;
    g.w.resize(n_layers);
    g.b.resize(n_layers);
    const double batch = static_cast<double>(x.rows());
    const Eigen::MatrixXd diff = acts[n_layers] - target;
    g.loss = diff.array().square().sum() / batch;

    Eigen::MatrixXd delta = (2.0 / batch) * diff;
    for (std::size_t l = n_layers; l-- > 0;) {
        g.w[l] = delta.transpose() * acts[l];
        g.b[l] = delta.colwise().sum().transpose();
        if (l > 0) {
            delta = (delta * w_[l]).cwiseProduct(activate_grad(pre[l - 1]));
        }
    }
    return g;
}

AdamState AdamState::init_for(const Mlp& model) {
    AdamState s;
    for (std::size_t l = 0; l < model.weights().size(); ++l) {
        s.m_w.emplace_back(Eigen::MatrixXd::Zero(model.weights()[l].rows(),
                                                 model.weights()[l].cols()));
        s.v_w.emplace_back(Eigen::MatrixXd::Zero(model.weights()[l].rows(),
                                                 model.weights()[l].cols()));
        s.m_b.emplace_back(Eigen::VectorXd::Zero(model.biases()[l].size()));
        s.v_b.emplace_back(Eigen::VectorXd::Zero(model.biases()[l].size()));
    }
    return s;
}

void adam_step(AdamState& state, Mlp& model, const Mlp::Gradients& grads,
               const AdamConfig& cfg) {
    if (state.m_w.size() != model.weights().size())
        throw ValidationError("adam state does not match the model");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t l = 0; l < model.weights().size(); ++l) {
        state.m_w[l] = cfg.beta1 * state.m_w[l] + (1.0 - cfg.beta1) * grads.w[l];
        state.v_w[l] =
            cfg.beta2 * state.v_w[l] + (1.0 - cfg.beta2) * grads.w[l].array().square().matrix();
        const Eigen::MatrixXd mw = state.m_w[l] / bc1;
        const Eigen::MatrixXd vw = state.v_w[l] / bc2;
        model.weights()[l] -=
            (cfg.lr * mw.array() / (vw.array().sqrt() + cfg.eps)).matrix();

        state.m_b[l] = cfg.beta1 * state.m_b[l] + (1.0 - cfg.beta1) * grads.b[l];
        state.v_b[l] =
            cfg.beta2 * state.v_b[l] + (1.0 - cfg.beta2) * grads.b[l].array().square().matrix();
        const Eigen::VectorXd mb = state.m_b[l] / bc1;
        const Eigen::VectorXd vb = state.v_b[l] / bc2;
        model.biases()[l] -= (cfg.lr * mb.array() / (vb.array().sqrt() + cfg.eps)).matrix();
    }
}

}  // namespace diffopf::nnet
