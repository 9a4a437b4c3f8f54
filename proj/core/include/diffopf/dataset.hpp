#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "diffopf/acopf.hpp"
#include "diffopf/grid.hpp"
#include "diffopf/rng.hpp"

namespace diffopf::dataset {

/// One x0 dimension: quantity is p_d/q_d (element = bus id) or p_g/q_g
/// (element = generator index).
struct LayoutEntry {
    std::string quantity;
    int element = 0;
    bool operator==(const LayoutEntry&) const = default;
};

/// Joint-vector layout (p_d, q_d, p_g, q_g) for a network, in bus and
/// generator storage order.
std::vector<LayoutEntry> x0_layout(const grid::Network& net);

std::string column_name(const LayoutEntry& e);

struct OpfRecord {
    Eigen::VectorXd p_d, q_d;          // per bus
    Eigen::VectorXd p_g, q_g;          // per generator
    Eigen::VectorXd c1_realized;       // per generator
    double objective = 0.0;
    acopf::SolveStatus solver_status = acopf::SolveStatus::max_iter;
    Eigen::VectorXd v, theta;          // solved profile, kept for re-checks

    Eigen::VectorXd x0(const grid::Network& net) const;
};

struct DatasetManifest {
    std::string network_hash;
    int n_records = 0;
    std::uint64_t seed = 0;
    double load_lo = 0.8, load_hi = 1.0;
    double cost_frac = 0.4;
    int n_train = 0, n_test = 0;
    std::string role;  // "train" or "test"
    std::vector<LayoutEntry> layout;

    void check(const grid::Network& net) const;
};

struct Dataset {
    std::vector<OpfRecord> records;
    DatasetManifest manifest;

    Eigen::MatrixXd x0_matrix(const grid::Network& net) const;
};

/// Per-bus load draw: p_d = u * nominal_p with u ~ U[lo, hi) i.i.d. per
/// bus and q_d scaled by the same factor, preserving the power factor.
std::pair<Eigen::VectorXd, Eigen::VectorXd> sample_load(const grid::Network& net, Philox& rng,
                                                        double lo = 0.8, double hi = 1.0);

/// Linear-cost draw: c1 = nominal * (1 + w), w ~ U[-frac, frac) i.i.d.
Eigen::VectorXd sample_costs(const grid::Network& net, Philox& rng, double frac = 0.4);

struct GenerateOptions {
    int n_records = 0;
    std::uint64_t seed = 0;
    double load_lo = 0.8, load_hi = 1.0;
    double cost_frac = 0.4;
    int workers = 1;
    acopf::OpfOptions solver;
    double max_discard_rate = 0.5;
    std::string role = "train";
    int* discarded_out = nullptr;  // optional discard count report
};

/// Draws loads and costs, solves the OPF for each, keeps exactly
/// n_records converged records (non-converged attempts are discarded and
/// redrawn). Reproducible from the seed for any worker count.
Dataset generate(const grid::Network& net, const GenerateOptions& opts);

void save_dataset(const grid::Network& net, const Dataset& ds, const std::string& csv_path,
                  const std::string& manifest_path);
Dataset load_dataset(const grid::Network& net, const std::string& csv_path,
                     const std::string& manifest_path);

/// Z-scoring over the x0 layout. Constant dimensions are dropped from the
/// model space and restored from stored constants on the way back.
class Normalizer {
public:
    static Normalizer fit(const Eigen::MatrixXd& x0_rows);
    static Normalizer from_moments(Eigen::VectorXd mean, Eigen::VectorXd std,
                                   std::vector<int> retained);

    int full_dim() const { return static_cast<int>(mean_.size()); }
    int model_dim() const { return static_cast<int>(retained_.size()); }
    const std::vector<int>& retained() const { return retained_; }
    const Eigen::VectorXd& mean() const { return mean_; }
    const Eigen::VectorXd& stddev() const { return std_; }

    /// -1 when the dimension was dropped as constant.
    int model_index_of(int full_idx) const;

    Eigen::VectorXd normalize(const Eigen::VectorXd& x) const;
    Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& x) const;
    Eigen::VectorXd denormalize(const Eigen::VectorXd& z) const;
    Eigen::MatrixXd denormalize_rows(const Eigen::MatrixXd& z) const;

private:
    Eigen::VectorXd mean_, std_;  // full dimension
    std::vector<int> retained_;
    std::vector<int> model_index_;  // full -> model, -1 if dropped
};

}  // namespace diffopf::dataset
