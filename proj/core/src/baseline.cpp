#include "diffopf/baseline.hpp"

#include <cmath>

#include "diffopf/errors.hpp"
#include "diffopf/rng.hpp"

namespace diffopf::baseline {

namespace {

void split_indices(const dataset::Normalizer& nz,
                   const std::vector<dataset::LayoutEntry>& layout, std::vector<int>& load_idx,
                   std::vector<int>& dispatch_idx) {
    for (int full = 0; full < nz.full_dim(); ++full) {
        const int mi = nz.model_index_of(full);
        if (mi < 0) continue;
        const auto& q = layout[static_cast<std::size_t>(full)].quantity;
        if (q == "p_d" || q == "q_d")
            load_idx.push_back(mi);
        else
            dispatch_idx.push_back(mi);
    }
}

}  // namespace

std::pair<Eigen::VectorXd, Eigen::VectorXd> PointPredictor::predict(
    const Eigen::VectorXd& p_d, const Eigen::VectorXd& q_d) const {
    // Assemble the raw x0 with the observed loads; dispatch entries are
    // placeholders and never read by the input selection.
    Eigen::VectorXd x0 = normalizer.mean();
    int p_seen = 0, q_seen = 0;
    for (std::size_t i = 0; i < layout.size(); ++i) {
        if (layout[i].quantity == "p_d") {
            if (p_seen >= p_d.size()) throw ValidationError("predict: p_d dimension mismatch");
            x0[static_cast<Eigen::Index>(i)] = p_d[p_seen++];
        } else if (layout[i].quantity == "q_d") {
            if (q_seen >= q_d.size()) throw ValidationError("predict: q_d dimension mismatch");
            x0[static_cast<Eigen::Index>(i)] = q_d[q_seen++];
        }
    }
    if (p_seen != p_d.size() || q_seen != q_d.size())
        throw ValidationError("predict: load vectors do not match the layout");

    const Eigen::VectorXd z = normalizer.normalize(x0);
    Eigen::MatrixXd in(1, static_cast<Eigen::Index>(load_model_idx.size()));
    for (std::size_t k = 0; k < load_model_idx.size(); ++k)
        in(0, static_cast<Eigen::Index>(k)) = z[load_model_idx[k]];
    const Eigen::MatrixXd out = mlp.forward(in);

    Eigen::VectorXd z_full = z;
    for (std::size_t k = 0; k < dispatch_model_idx.size(); ++k)
        z_full[dispatch_model_idx[k]] = out(0, static_cast<Eigen::Index>(k));
    const Eigen::VectorXd full = normalizer.denormalize(z_full);

    std::vector<double> pg, qg;
    for (std::size_t i = 0; i < layout.size(); ++i) {
        if (layout[i].quantity == "p_g") pg.push_back(full[static_cast<Eigen::Index>(i)]);
        if (layout[i].quantity == "q_g") qg.push_back(full[static_cast<Eigen::Index>(i)]);
    }
    return {Eigen::Map<Eigen::VectorXd>(pg.data(), static_cast<Eigen::Index>(pg.size())),
            Eigen::Map<Eigen::VectorXd>(qg.data(), static_cast<Eigen::Index>(qg.size()))};
}

PointPredictor train_baseline(const Eigen::MatrixXd& x0_raw,
                              const std::vector<dataset::LayoutEntry>& layout,
                              const BaselineTrainConfig& cfg,
                              std::vector<double>* loss_history) {
    if (x0_raw.rows() < 2) throw ConfigError("baseline training needs at least two records");

    PointPredictor model;
    model.normalizer = dataset::Normalizer::fit(x0_raw);
    model.layout = layout;
    split_indices(model.normalizer, layout, model.load_model_idx, model.dispatch_model_idx);
    if (model.load_model_idx.empty() || model.dispatch_model_idx.empty())
        throw ValidationError("baseline needs both varying load and dispatch dimensions");

    nnet::MlpSpec spec;
    spec.input_dim = static_cast<int>(model.load_model_idx.size());
    spec.hidden = cfg.hidden;
    spec.output_dim = static_cast<int>(model.dispatch_model_idx.size());
    model.mlp = nnet::Mlp::random_init(spec, stream_id("baseline-init", cfg.seed), 1.0);

    const Eigen::MatrixXd z = model.normalizer.normalize_rows(x0_raw);
    Eigen::MatrixXd in(z.rows(), spec.input_dim);
    Eigen::MatrixXd target(z.rows(), spec.output_dim);
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
        for (std::size_t k = 0; k < model.load_model_idx.size(); ++k)
            in(r, static_cast<Eigen::Index>(k)) = z(r, model.load_model_idx[k]);
        for (std::size_t k = 0; k < model.dispatch_model_idx.size(); ++k)
            target(r, static_cast<Eigen::Index>(k)) = z(r, model.dispatch_model_idx[k]);
    }

    const Eigen::Index n = z.rows();
    const int steps_per_epoch = static_cast<int>((n + cfg.batch - 1) / cfg.batch);
    nnet::AdamState adam = nnet::AdamState::init_for(model.mlp);
    std::uint64_t global_step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double epoch_loss = 0.0;
        for (int step = 0; step < steps_per_epoch; ++step, ++global_step) {
            Philox rng(cfg.seed, stream_id("baseline-step", global_step));
            const int bsz = static_cast<int>(std::min<Eigen::Index>(cfg.batch, n));
            Eigen::MatrixXd bx(bsz, spec.input_dim);
            Eigen::MatrixXd bt(bsz, spec.output_dim);
            for (int i = 0; i < bsz; ++i) {
                const auto row = static_cast<Eigen::Index>(
                    rng.uniform_index(static_cast<std::uint64_t>(n)));
                bx.row(i) = in.row(row);
                bt.row(i) = target.row(row);
            }
            const auto grads = model.mlp.backward(bx, bt);
            if (!std::isfinite(grads.loss))
                throw NumericError("non-finite baseline loss at epoch " + std::to_string(epoch));
            nnet::adam_step(adam, model.mlp, grads, cfg.adam);
            epoch_loss += grads.loss;
        }
        if (loss_history) loss_history->push_back(epoch_loss / steps_per_epoch);
    }
    return model;
}

}  // namespace diffopf::baseline
