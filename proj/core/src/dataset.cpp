#include "diffopf/dataset.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "diffopf/errors.hpp"
#include "diffopf/hash.hpp"
#include "diffopf/parallel.hpp"

namespace diffopf::dataset {

using grid::Network;
using nlohmann::json;

std::vector<LayoutEntry> x0_layout(const Network& net) {
    std::vector<LayoutEntry> layout;
    layout.reserve(static_cast<std::size_t>(2 * net.n_buses() + 2 * net.n_gens()));
    for (const auto& b : net.buses) layout.push_back({"p_d", b.id});
    for (const auto& b : net.buses) layout.push_back({"q_d", b.id});
    for (int g = 0; g < net.n_gens(); ++g) layout.push_back({"p_g", g});
    for (int g = 0; g < net.n_gens(); ++g) layout.push_back({"q_g", g});
    return layout;
}

std::string column_name(const LayoutEntry& e) {
    return e.quantity + "[" + std::to_string(e.element) + "]";
}

Eigen::VectorXd OpfRecord::x0(const Network& net) const {
    const int nb = net.n_buses();
    const int ng = net.n_gens();
    Eigen::VectorXd x(2 * nb + 2 * ng);
    x.head(nb) = p_d;
    x.segment(nb, nb) = q_d;
    x.segment(2 * nb, ng) = p_g;
    x.tail(ng) = q_g;
    return x;
}

void DatasetManifest::check(const Network& net) const {
    const auto expected = x0_layout(net);
    if (layout != expected)
        throw ValidationError("manifest layout does not cover the network's x0 dimensions");
    if (static_cast<int>(layout.size()) != 2 * net.n_buses() + 2 * net.n_gens())
        throw ValidationError("manifest layout has the wrong dimension count");
}

Eigen::MatrixXd Dataset::x0_matrix(const Network& net) const {
    const int d = 2 * net.n_buses() + 2 * net.n_gens();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(records.size()), d);
    for (std::size_t i = 0; i < records.size(); ++i)
        m.row(static_cast<Eigen::Index>(i)) = records[i].x0(net).transpose();
    return m;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> sample_load(const Network& net, Philox& rng,
                                                        double lo, double hi) {
    const int nb = net.n_buses();
    Eigen::VectorXd p(nb), q(nb);
    for (int b = 0; b < nb; ++b) {
        const double u = rng.uniform(lo, hi);
        p[b] = u * net.nominal_load[static_cast<std::size_t>(b)].p;
        q[b] = u * net.nominal_load[static_cast<std::size_t>(b)].q;
    }
    return {p, q};
}

Eigen::VectorXd sample_costs(const Network& net, Philox& rng, double frac) {
    Eigen::VectorXd c1(net.n_gens());
    for (int g = 0; g < net.n_gens(); ++g) {
        const double w = rng.uniform(-frac, frac);
        c1[g] = net.generators[static_cast<std::size_t>(g)].cost_c1 * (1.0 + w);
    }
    return c1;
}

Dataset generate(const Network& net, const GenerateOptions& opts) {
    if (opts.n_records < 1) throw ConfigError("n_records must be >= 1");
    if (!(opts.load_lo > 0.0) || opts.load_lo > opts.load_hi)
        throw ConfigError("invalid load range");

    const std::string attempt_tag = opts.role + "-attempt";

    auto run_attempt = [&](std::uint64_t k) -> OpfRecord {
        Philox rng(opts.seed, stream_id(attempt_tag, k));
        auto [p_d, q_d] = sample_load(net, rng, opts.load_lo, opts.load_hi);
        const Eigen::VectorXd c1 = sample_costs(net, rng, opts.cost_frac);
        const acopf::OpfSolution sol =
            acopf::solve_opf(net, {p_d, q_d}, c1, std::nullopt, opts.solver);
        OpfRecord rec;
        rec.p_d = p_d;
        rec.q_d = q_d;
        rec.p_g = sol.state.p_g;
        rec.q_g = sol.state.q_g;
        rec.c1_realized = c1;
        rec.objective = sol.objective;
        rec.solver_status = sol.status;
        rec.v = sol.state.v;
        rec.theta = sol.state.theta;
        return rec;
    };

    Dataset ds;
    ds.records.reserve(static_cast<std::size_t>(opts.n_records));
    int attempts = 0;
    int discarded = 0;
    std::uint64_t next_attempt = 0;
    const int block = std::max(16, 4 * std::max(1, opts.workers));
    while (static_cast<int>(ds.records.size()) < opts.n_records) {
        const int need = opts.n_records - static_cast<int>(ds.records.size());
        const int batch = std::min(block, std::max(need, 1));
        std::vector<OpfRecord> out(static_cast<std::size_t>(batch));
        const std::uint64_t base = next_attempt;
        parallel_for(static_cast<std::size_t>(batch), opts.workers,
                     [&](std::size_t i) { out[i] = run_attempt(base + i); });
        next_attempt += static_cast<std::uint64_t>(batch);
        for (auto& rec : out) {
            ++attempts;
            if (static_cast<int>(ds.records.size()) >= opts.n_records) break;
            if (rec.solver_status == acopf::SolveStatus::converged) {
                ds.records.push_back(std::move(rec));
            } else {
                ++discarded;
            }
        }
        if (attempts >= 50 &&
            static_cast<double>(discarded) > opts.max_discard_rate * attempts)
            throw NumericError("OPF discard rate above " +
                               std::to_string(opts.max_discard_rate) +
                               "; the case appears ill-posed (" + std::to_string(discarded) +
                               "/" + std::to_string(attempts) + " failed)");
    }
    if (opts.discarded_out) *opts.discarded_out = discarded;

    ds.manifest.network_hash = to_hex(fnv1a64(grid::serialize_case(net).data(),
                                              grid::serialize_case(net).size()));
    ds.manifest.n_records = opts.n_records;
    ds.manifest.seed = opts.seed;
    ds.manifest.load_lo = opts.load_lo;
    ds.manifest.load_hi = opts.load_hi;
    ds.manifest.cost_frac = opts.cost_frac;
    ds.manifest.role = opts.role;
    ds.manifest.n_train = opts.role == "train" ? opts.n_records : 0;
    ds.manifest.n_test = opts.role == "test" ? opts.n_records : 0;
    ds.manifest.layout = x0_layout(net);
    return ds;
}

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void save_dataset(const Network& net, const Dataset& ds, const std::string& csv_path,
                  const std::string& manifest_path) {
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw Error("cannot write dataset file: " + csv_path);

    // Header: the x0 dimensions per the manifest layout, then diagnostic
    // columns (voltage profile, realized costs, objective, status).
    std::ostringstream header;
    for (const auto& e : ds.manifest.layout) header << column_name(e) << ",";
    for (const auto& b : net.buses) header << "v[" << b.id << "],";
    for (const auto& b : net.buses) header << "theta[" << b.id << "],";
    for (int g = 0; g < net.n_gens(); ++g) header << "c1[" << g << "],";
    header << "objective,status";
    out << header.str() << "\n";

    for (const auto& rec : ds.records) {
        std::ostringstream row;
        const Eigen::VectorXd x = rec.x0(net);
        for (Eigen::Index i = 0; i < x.size(); ++i) row << fmt_double(x[i]) << ",";
        for (Eigen::Index i = 0; i < rec.v.size(); ++i) row << fmt_double(rec.v[i]) << ",";
        for (Eigen::Index i = 0; i < rec.theta.size(); ++i) row << fmt_double(rec.theta[i]) << ",";
        for (Eigen::Index i = 0; i < rec.c1_realized.size(); ++i)
            row << fmt_double(rec.c1_realized[i]) << ",";
        row << fmt_double(rec.objective) << "," << acopf::to_string(rec.solver_status);
        out << row.str() << "\n";
    }
    out.close();

    json jm;
    jm["network_hash"] = ds.manifest.network_hash;
    jm["n_records"] = ds.manifest.n_records;
    jm["seed"] = ds.manifest.seed;
    jm["load_range"] = {ds.manifest.load_lo, ds.manifest.load_hi};
    jm["cost_range"] = ds.manifest.cost_frac;
    jm["split"] = {{"train", ds.manifest.n_train}, {"test", ds.manifest.n_test}};
    jm["role"] = ds.manifest.role;
    jm["layout"] = json::array();
    for (const auto& e : ds.manifest.layout)
        jm["layout"].push_back({{"quantity", e.quantity}, {"element", e.element}});
    std::ofstream mout(manifest_path, std::ios::binary);
    if (!mout) throw Error("cannot write manifest: " + manifest_path);
    mout << jm.dump(2) << "\n";
}

Dataset load_dataset(const Network& net, const std::string& csv_path,
                     const std::string& manifest_path) {
    std::ifstream min(manifest_path);
    if (!min) throw MissingArtifactError("manifest not found: " + manifest_path);
    json jm;
    try {
        jm = json::parse(min);
    } catch (const json::parse_error& e) {
        throw ParseError(manifest_path + ": " + e.what());
    }

    Dataset ds;
    ds.manifest.network_hash = jm.at("network_hash").get<std::string>();
    ds.manifest.n_records = jm.at("n_records").get<int>();
    ds.manifest.seed = jm.at("seed").get<std::uint64_t>();
    ds.manifest.load_lo = jm.at("load_range")[0].get<double>();
    ds.manifest.load_hi = jm.at("load_range")[1].get<double>();
    ds.manifest.cost_frac = jm.at("cost_range").get<double>();
    ds.manifest.n_train = jm.at("split").at("train").get<int>();
    ds.manifest.n_test = jm.at("split").at("test").get<int>();
    ds.manifest.role = jm.value("role", "train");
    for (const auto& e : jm.at("layout"))
        ds.manifest.layout.push_back(
            {e.at("quantity").get<std::string>(), e.at("element").get<int>()});
    ds.manifest.check(net);

    std::ifstream in(csv_path);
    if (!in) throw MissingArtifactError("dataset file not found: " + csv_path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(csv_path + ": empty file");

    const int nb = net.n_buses();
    const int ng = net.n_gens();
    const int d = 2 * nb + 2 * ng;
    const int n_cols = d + 2 * nb + ng + 2;

    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (static_cast<int>(cells.size()) != n_cols)
            throw ParseError(csv_path + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(n_cols) + " columns, got " +
                             std::to_string(cells.size()));
        auto num = [&](int idx) {
            double v = 0.0;
            const auto& s = cells[static_cast<std::size_t>(idx)];
            const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
            if (res.ec != std::errc())
                throw ParseError(csv_path + ":" + std::to_string(line_no) +
                                 ": bad number '" + s + "'");
            return v;
        };
        OpfRecord rec;
        rec.p_d.resize(nb);
        rec.q_d.resize(nb);
        rec.p_g.resize(ng);
        rec.q_g.resize(ng);
        rec.v.resize(nb);
        rec.theta.resize(nb);
        rec.c1_realized.resize(ng);
        int c = 0;
        for (int i = 0; i < nb; ++i) rec.p_d[i] = num(c++);
        for (int i = 0; i < nb; ++i) rec.q_d[i] = num(c++);
        for (int i = 0; i < ng; ++i) rec.p_g[i] = num(c++);
        for (int i = 0; i < ng; ++i) rec.q_g[i] = num(c++);
        for (int i = 0; i < nb; ++i) rec.v[i] = num(c++);
        for (int i = 0; i < nb; ++i) rec.theta[i] = num(c++);
        for (int i = 0; i < ng; ++i) rec.c1_realized[i] = num(c++);
        rec.objective = num(c++);
        rec.solver_status = acopf::solve_status_from_string(cells[static_cast<std::size_t>(c)]);
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

// ---------------------------------------------------------------------------

Normalizer Normalizer::fit(const Eigen::MatrixXd& x0_rows) {
    const Eigen::Index n = x0_rows.rows();
    if (n < 2)
        throw ValidationError(
            "normalizer needs at least two records (std undefined otherwise)");
    Normalizer nz;
    nz.mean_ = x0_rows.colwise().mean();
    Eigen::VectorXd var = Eigen::VectorXd::Zero(x0_rows.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd d = x0_rows.row(i).transpose() - nz.mean_;
        var += d.cwiseProduct(d);
    }
    var /= static_cast<double>(n);
    nz.std_ = var.cwiseSqrt();
    nz.model_index_.assign(static_cast<std::size_t>(x0_rows.cols()), -1);
    for (Eigen::Index j = 0; j < x0_rows.cols(); ++j) {
        const double tol = 1e-12 * std::max(1.0, std::abs(nz.mean_[j]));
        if (nz.std_[j] > tol) {
            nz.model_index_[static_cast<std::size_t>(j)] =
                static_cast<int>(nz.retained_.size());
            nz.retained_.push_back(static_cast<int>(j));
        }
    }
    if (nz.retained_.empty())
        throw ValidationError("every dimension is constant; nothing to model");
    return nz;
}

Normalizer Normalizer::from_moments(Eigen::VectorXd mean, Eigen::VectorXd std,
                                    std::vector<int> retained) {
    Normalizer nz;
    nz.mean_ = std::move(mean);
    nz.std_ = std::move(std);
    nz.retained_ = std::move(retained);
    nz.model_index_.assign(static_cast<std::size_t>(nz.mean_.size()), -1);
    for (std::size_t k = 0; k < nz.retained_.size(); ++k)
        nz.model_index_[static_cast<std::size_t>(nz.retained_[k])] = static_cast<int>(k);
    return nz;
}

int Normalizer::model_index_of(int full_idx) const {
    return model_index_[static_cast<std::size_t>(full_idx)];
}

Eigen::VectorXd Normalizer::normalize(const Eigen::VectorXd& x) const {
    if (x.size() != mean_.size()) throw ValidationError("normalize: dimension mismatch");
    Eigen::VectorXd z(model_dim());
    for (std::size_t k = 0; k < retained_.size(); ++k) {
        const int j = retained_[k];
        z[static_cast<Eigen::Index>(k)] = (x[j] - mean_[j]) / std_[j];
    }
    return z;
}

Eigen::MatrixXd Normalizer::normalize_rows(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd z(x.rows(), model_dim());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        z.row(i) = normalize(x.row(i).transpose()).transpose();
    return z;
}

Eigen::VectorXd Normalizer::denormalize(const Eigen::VectorXd& z) const {
    if (z.size() != model_dim()) throw ValidationError("denormalize: dimension mismatch");
    Eigen::VectorXd x = mean_;  // dropped dimensions keep their constants
    for (std::size_t k = 0; k < retained_.size(); ++k) {
        const int j = retained_[k];
        x[j] = z[static_cast<Eigen::Index>(k)] * std_[j] + mean_[j];
    }
    return x;
}

Eigen::MatrixXd Normalizer::denormalize_rows(const Eigen::MatrixXd& z) const {
    Eigen::MatrixXd x(z.rows(), full_dim());
    for (Eigen::Index i = 0; i < z.rows(); ++i)
        x.row(i) = denormalize(z.row(i).transpose()).transpose();
    return x;
}

}  // namespace diffopf::dataset
