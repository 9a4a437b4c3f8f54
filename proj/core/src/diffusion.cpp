#include "diffopf/diffusion.hpp"

#include <cmath>

#include "diffopf/errors.hpp"
#include "diffopf/parallel.hpp"
#include "diffopf/rng.hpp"

namespace diffopf::diffusion {

StdMode std_mode_from_string(const std::string& s) {
    if (s == "ddpm") return StdMode::ddpm;
    if (s == "paper") return StdMode::paper;
    throw ConfigError("std_mode must be \"ddpm\" or \"paper\", got \"" + s + "\"");
}

const char* to_string(StdMode m) { return m == StdMode::ddpm ? "ddpm" : "paper"; }

ScheduleShape shape_from_string(const std::string& s) {
    if (s == "linear") return ScheduleShape::linear;
    if (s == "cosine") return ScheduleShape::cosine;
    throw ConfigError("schedule shape must be \"linear\" or \"cosine\", got \"" + s + "\"");
}

const char* to_string(ScheduleShape s) {
    return s == ScheduleShape::linear ? "linear" : "cosine";
}

NoiseSchedule make_schedule(int T, double beta_start, double beta_end, ScheduleShape shape,
                            StdMode std_mode) {
    if (T < 1) throw ConfigError("schedule needs T >= 1");
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0))
        throw ConfigError("schedule needs 0 < beta_start <= beta_end < 1");

    NoiseSchedule s;
    s.T = T;
    s.std_mode = std_mode;
    s.beta.resize(T);
    if (shape == ScheduleShape::linear) {
        for (int t = 0; t < T; ++t)
            s.beta[t] = T == 1 ? beta_start
                               : beta_start + (beta_end - beta_start) * t / (T - 1);
    } else {
        // Squared-cosine cumulative profile; betas recovered from the
        // abar ratios and capped at 0.999.
        const double off = 0.008;
        auto f = [&](double u) {
            const double a = (u + off) / (1.0 + off) * M_PI / 2.0;
            return std::cos(a) * std::cos(a);
        };
        double prev = 1.0;
        for (int t = 1; t <= T; ++t) {
            const double ab = f(static_cast<double>(t) / T) / f(0.0);
            double beta = 1.0 - ab / prev;
            beta = std::min(std::max(beta, 1e-8), 0.999);
            s.beta[t - 1] = beta;
            prev *= 1.0 - beta;
        }
    }
    s.alpha = Eigen::VectorXd::Ones(T) - s.beta;
    s.alpha_bar.resize(T);
    s.sigma.resize(T);
    double ab = 1.0;
    for (int t = 1; t <= T; ++t) {
        if (!(s.beta[t - 1] > 0.0 && s.beta[t - 1] < 1.0))
            throw ConfigError("schedule produced beta outside (0, 1)");
        const double ab_prev = ab;
        ab *= s.alpha[t - 1];
        if (!(ab < ab_prev)) throw ConfigError("alpha_bar must be strictly decreasing");
        s.alpha_bar[t - 1] = ab;
        const double var = s.beta[t - 1] * (1.0 - ab_prev) / (1.0 - ab);
        s.sigma[t - 1] = std_mode == StdMode::ddpm ? std::sqrt(var) : var;
    }
    return s;
}

namespace {

void check_t(const NoiseSchedule& s, int t) {
    if (t < 1 || t > s.T)
        throw ConfigError("step index t must satisfy 1 <= t <= T, got " + std::to_string(t));
}

}  // namespace

Eigen::VectorXd forward_perturb(const NoiseSchedule& s, const Eigen::VectorXd& z0, int t,
                                const Eigen::VectorXd& eps) {
    check_t(s, t);
    if (eps.size() != z0.size()) throw ValidationError("forward_perturb: dimension mismatch");
    const double ab = s.alpha_bar_at(t);
    return std::sqrt(ab) * z0 + std::sqrt(1.0 - ab) * eps;
}

Eigen::VectorXd score_from_noise(const NoiseSchedule& s, const Eigen::VectorXd& eps_hat, int t) {
    check_t(s, t);
    return -eps_hat / std::sqrt(1.0 - s.alpha_bar_at(t));
}

Eigen::VectorXd clean_estimate(const NoiseSchedule& s, const Eigen::VectorXd& x_t,
                               const Eigen::VectorXd& score, int t) {
    check_t(s, t);
    const double ab = s.alpha_bar_at(t);
    return (x_t + (1.0 - ab) * score) / std::sqrt(ab);
}

Eigen::MatrixXd DiffusionModel::predict_noise(const Eigen::MatrixXd& z,
                                              const std::vector<int>& t) const {
    if (z.cols() != model_dim()) throw ValidationError("predict_noise: dimension mismatch");
    if (static_cast<Eigen::Index>(t.size()) != z.rows())
        throw ValidationError("predict_noise: one t per row required");
    Eigen::MatrixXd x(z.rows(), model_dim() + emb_dim);
    x.leftCols(model_dim()) = z;
    for (Eigen::Index i = 0; i < z.rows(); ++i)
        x.row(i).tail(emb_dim) =
            nnet::time_embed(t[static_cast<std::size_t>(i)], schedule.T, emb_dim, emb_base)
                .transpose();
    return predictor.forward(x);
}

DiffusionModel train(const Eigen::MatrixXd& x0_raw,
                     const std::vector<dataset::LayoutEntry>& layout, const TrainConfig& cfg,
                     std::vector<double>* loss_history) {
    if (x0_raw.rows() < 1) throw ConfigError("training needs a nonempty dataset");
    if (cfg.batch < 1 || cfg.epochs < 1) throw ConfigError("batch and epochs must be >= 1");

    DiffusionModel model;
    model.schedule = make_schedule(cfg.T, cfg.beta_start, cfg.beta_end, cfg.shape, cfg.std_mode);
    if (!model.schedule.terminal_ok() && !cfg.allow_high_terminal_alpha_bar)
        throw ConfigError(
            "terminal alpha_bar exceeds 1e-3; lengthen the schedule or raise beta_end");
    model.normalizer = cfg.normalizer ? *cfg.normalizer : dataset::Normalizer::fit(x0_raw);
    model.layout = layout;
    model.emb_dim = cfg.emb_dim;
    model.emb_base = cfg.emb_base;
    const int d = model.model_dim();

    nnet::MlpSpec spec;
    spec.input_dim = d + cfg.emb_dim;
    spec.hidden = cfg.hidden;
    spec.output_dim = d;
    model.predictor = nnet::Mlp::random_init(spec, cfg.seed);

    const Eigen::MatrixXd z0 = model.normalizer.normalize_rows(x0_raw);
    const Eigen::Index n = z0.rows();
    const int steps_per_epoch =
        static_cast<int>((n + cfg.batch - 1) / cfg.batch);

    nnet::AdamState adam = nnet::AdamState::init_for(model.predictor);
    std::uint64_t global_step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double epoch_loss = 0.0;
        for (int step = 0; step < steps_per_epoch; ++step, ++global_step) {
            Philox rng(cfg.seed, stream_id("train-step", global_step));
            const int bsz = static_cast<int>(std::min<Eigen::Index>(cfg.batch, n));
            Eigen::MatrixXd x(bsz, d + cfg.emb_dim);
            Eigen::MatrixXd target(bsz, d);
            for (int i = 0; i < bsz; ++i) {
                const auto row = static_cast<Eigen::Index>(rng.uniform_index(
                    static_cast<std::uint64_t>(n)));
                const int t = 1 + static_cast<int>(rng.uniform_index(
                                      static_cast<std::uint64_t>(cfg.T)));
                const Eigen::VectorXd eps = rng.normal_vector(d);
                x.row(i).head(d) =
                    forward_perturb(model.schedule, z0.row(row).transpose(), t, eps).transpose();
                x.row(i).tail(cfg.emb_dim) =
                    nnet::time_embed(t, cfg.T, cfg.emb_dim, cfg.emb_base).transpose();
                target.row(i) = eps.transpose();
            }
            const auto grads = model.predictor.backward(x, target);
            if (!std::isfinite(grads.loss))
                throw NumericError("non-finite training loss at epoch " +
                                   std::to_string(epoch) + ", step " + std::to_string(step));
            nnet::adam_step(adam, model.predictor, grads, cfg.adam);
            epoch_loss += grads.loss;
        }
        if (loss_history) loss_history->push_back(epoch_loss / steps_per_epoch);
    }
    return model;
}

namespace detail {

Eigen::VectorXd run_chain(const DiffusionModel& model, Philox& rng, X0Hook hook,
                          const void* hook_ctx, bool* finite_ok) {
    const int d = model.model_dim();
    const NoiseSchedule& s = model.schedule;
    Eigen::VectorXd x = rng.normal_vector(d);
    if (finite_ok) *finite_ok = true;
    for (int t = s.T; t >= 1; --t) {
        const Eigen::MatrixXd eps_hat =
            model.predict_noise(x.transpose(), std::vector<int>{t});
        const Eigen::VectorXd score = score_from_noise(s, eps_hat.row(0).transpose(), t);
        Eigen::VectorXd x0_hat = clean_estimate(s, x, score, t);
        if (hook) hook(x0_hat, t, hook_ctx);
        const double ab = s.alpha_bar_at(t);
        const double ab_prev = s.alpha_bar_at(t - 1);
        const double beta = s.beta_at(t);
        const double alpha = 1.0 - beta;
        Eigen::VectorXd next = (std::sqrt(alpha) * (1.0 - ab_prev) * x +
                                std::sqrt(ab_prev) * beta * x0_hat) /
                               (1.0 - ab);
        if (t > 1) next += s.sigma_at(t) * rng.normal_vector(d);
        x = std::move(next);
        if (!x.allFinite()) {
            if (finite_ok) {
                *finite_ok = false;
                return x;
            }
            throw NumericError("sampling chain diverged at t=" + std::to_string(t));
        }
    }
    return x;
}

}  // namespace detail

Eigen::MatrixXd sample(const DiffusionModel& model, int n, std::uint64_t seed, int workers) {
    if (n < 1) throw ConfigError("sample count must be >= 1");
    Eigen::MatrixXd z(n, model.model_dim());
    parallel_for(static_cast<std::size_t>(n), workers, [&](std::size_t i) {
        Philox rng(seed, stream_id("chain", i));
        z.row(static_cast<Eigen::Index>(i)) =
            detail::run_chain(model, rng, nullptr, nullptr, nullptr).transpose();
    });
    return model.normalizer.denormalize_rows(z);
}

}  // namespace diffopf::diffusion
