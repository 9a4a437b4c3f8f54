#include "diffopf/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "diffopf/errors.hpp"
#include "diffopf/hash.hpp"

namespace diffopf::checkpoint {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'D', 'O', 'P', 'F', 'C', 'K', 'P', '1'};

json normalizer_to_json(const dataset::Normalizer& nz) {
    json j;
    j["mean"] = std::vector<double>(nz.mean().data(), nz.mean().data() + nz.mean().size());
    j["std"] =
        std::vector<double>(nz.stddev().data(), nz.stddev().data() + nz.stddev().size());
    j["retained"] = nz.retained();
    return j;
}

dataset::Normalizer normalizer_from_json(const json& j) {
    const auto mean = j.at("mean").get<std::vector<double>>();
    const auto stdv = j.at("std").get<std::vector<double>>();
    Eigen::VectorXd m = Eigen::Map<const Eigen::VectorXd>(mean.data(),
                                                          static_cast<Eigen::Index>(mean.size()));
    Eigen::VectorXd s = Eigen::Map<const Eigen::VectorXd>(stdv.data(),
                                                          static_cast<Eigen::Index>(stdv.size()));
    return dataset::Normalizer::from_moments(std::move(m), std::move(s),
                                             j.at("retained").get<std::vector<int>>());
}

json layout_to_json(const std::vector<dataset::LayoutEntry>& layout) {
    json j = json::array();
    for (const auto& e : layout) j.push_back({{"quantity", e.quantity}, {"element", e.element}});
    return j;
}

std::vector<dataset::LayoutEntry> layout_from_json(const json& j) {
    std::vector<dataset::LayoutEntry> layout;
    for (const auto& e : j)
        layout.push_back({e.at("quantity").get<std::string>(), e.at("element").get<int>()});
    return layout;
}

struct RawFile {
    json header;
    std::vector<double> blob;
};

void write_file(const std::string& path, const json& header, const std::vector<double>& blob) {
    json h = header;
    h["weights_hash"] =
        to_hex(fnv1a64(blob.data(), blob.size() * sizeof(double)));
    h["weights_count"] = blob.size();
    const std::string htext = h.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint: " + path);
    out.write(kMagic, sizeof(kMagic));
    const std::uint64_t hlen = htext.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
    out.write(reinterpret_cast<const char*>(blob.data()),
              static_cast<std::streamsize>(blob.size() * sizeof(double)));
    if (!out) throw Error("short write on checkpoint: " + path);
}

RawFile read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifactError("checkpoint not found: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw ParseError(path + ": not a model checkpoint (bad magic)");
    std::uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string htext(hlen, '\0');
    in.read(htext.data(), static_cast<std::streamsize>(hlen));
    RawFile f;
    try {
        f.header = json::parse(htext);
    } catch (const json::parse_error& e) {
        throw ParseError(path + ": corrupt checkpoint header: " + e.what());
    }
    const auto count = f.header.at("weights_count").get<std::size_t>();
    f.blob.resize(count);
    in.read(reinterpret_cast<char*>(f.blob.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw ParseError(path + ": truncated weight blob");
    const std::string expect = f.header.at("weights_hash").get<std::string>();
    const std::string got = to_hex(fnv1a64(f.blob.data(), f.blob.size() * sizeof(double)));
    if (expect != got)
        throw ParseError(path + ": weight hash mismatch (expected " + expect + ", got " + got +
                         ")");
    return f;
}

json mlp_arch_json(const nnet::Mlp& mlp) {
    json j;
    j["input_dim"] = mlp.spec().input_dim;
    j["hidden"] = mlp.spec().hidden;
    j["output_dim"] = mlp.spec().output_dim;
    j["activation"] = mlp.spec().activation;
    return j;
}

nnet::MlpSpec mlp_arch_from_json(const json& j) {
    nnet::MlpSpec spec;
    spec.input_dim = j.at("input_dim").get<int>();
    spec.hidden = j.at("hidden").get<std::vector<int>>();
    spec.output_dim = j.at("output_dim").get<int>();
    spec.activation = j.at("activation").get<std::string>();
    return spec;
}

void append_weights(const nnet::Mlp& mlp, std::vector<double>& blob) {
    for (std::size_t l = 0; l < mlp.weights().size(); ++l) {
        const auto& w = mlp.weights()[l];
        blob.insert(blob.end(), w.data(), w.data() + w.size());
        const auto& b = mlp.biases()[l];
        blob.insert(blob.end(), b.data(), b.data() + b.size());
    }
}

nnet::Mlp mlp_from_blob(const nnet::MlpSpec& spec, const std::vector<double>& blob) {
    nnet::Mlp mlp(spec);
    std::size_t pos = 0;
    for (std::size_t l = 0; l < mlp.weights().size(); ++l) {
        auto& w = mlp.weights()[l];
        if (pos + static_cast<std::size_t>(w.size()) > blob.size())
            throw ParseError("checkpoint weight blob shorter than the architecture requires");
        std::memcpy(w.data(), blob.data() + pos, static_cast<std::size_t>(w.size()) *
                                                     sizeof(double));
        pos += static_cast<std::size_t>(w.size());
        auto& b = mlp.biases()[l];
        std::memcpy(b.data(), blob.data() + pos, static_cast<std::size_t>(b.size()) *
                                                     sizeof(double));
        pos += static_cast<std::size_t>(b.size());
    }
    if (pos != blob.size())
        throw ParseError("checkpoint weight blob longer than the architecture requires");
    return mlp;
}

}  // namespace

void save_diffusion(const diffusion::DiffusionModel& model, const std::string& path) {
    json h;
    h["version"] = 1;
    h["kind"] = "diffusion";
    h["arch"] = mlp_arch_json(model.predictor);
    h["emb_dim"] = model.emb_dim;
    h["emb_base"] = model.emb_base;
    h["schedule"] = {
        {"T", model.schedule.T},
        {"beta", std::vector<double>(model.schedule.beta.data(),
                                     model.schedule.beta.data() + model.schedule.beta.size())},
        {"std_mode", diffusion::to_string(model.schedule.std_mode)},
    };
    h["normalizer"] = normalizer_to_json(model.normalizer);
    h["layout"] = layout_to_json(model.layout);
    std::vector<double> blob;
    append_weights(model.predictor, blob);
    write_file(path, h, blob);
}

diffusion::DiffusionModel load_diffusion(const std::string& path) {
    const RawFile f = read_file(path);
    if (f.header.at("kind").get<std::string>() != "diffusion")
        throw ParseError(path + ": checkpoint kind is not \"diffusion\"");
    diffusion::DiffusionModel m;
    const auto& js = f.header.at("schedule");
    const auto betas = js.at("beta").get<std::vector<double>>();
    m.schedule.T = js.at("T").get<int>();
    if (static_cast<int>(betas.size()) != m.schedule.T)
        throw ParseError(path + ": schedule length mismatch");
    m.schedule.std_mode = diffusion::std_mode_from_string(js.at("std_mode").get<std::string>());
    m.schedule.beta =
        Eigen::Map<const Eigen::VectorXd>(betas.data(), static_cast<Eigen::Index>(betas.size()));
    m.schedule.alpha = Eigen::VectorXd::Ones(m.schedule.T) - m.schedule.beta;
    m.schedule.alpha_bar.resize(m.schedule.T);
    m.schedule.sigma.resize(m.schedule.T);
    double ab = 1.0;
    for (int t = 1; t <= m.schedule.T; ++t) {
        const double ab_prev = ab;
        ab *= m.schedule.alpha[t - 1];
        m.schedule.alpha_bar[t - 1] = ab;
        const double var = m.schedule.beta[t - 1] * (1.0 - ab_prev) / (1.0 - ab);
        m.schedule.sigma[t - 1] =
            m.schedule.std_mode == diffusion::StdMode::ddpm ? std::sqrt(var) : var;
    }
    m.emb_dim = f.header.at("emb_dim").get<int>();
    m.emb_base = f.header.at("emb_base").get<double>();
    m.normalizer = normalizer_from_json(f.header.at("normalizer"));
    m.layout = layout_from_json(f.header.at("layout"));
    m.predictor = mlp_from_blob(mlp_arch_from_json(f.header.at("arch")), f.blob);
    if (m.predictor.spec().input_dim != m.model_dim() + m.emb_dim)
        throw ParseError(path + ": predictor input dim does not match model + embedding dims");
    return m;
}

void save_baseline(const baseline::PointPredictor& model, const std::string& path) {
    json h;
    h["version"] = 1;
    h["kind"] = "baseline";
    h["arch"] = mlp_arch_json(model.mlp);
    h["normalizer"] = normalizer_to_json(model.normalizer);
    h["layout"] = layout_to_json(model.layout);
    h["load_model_idx"] = model.load_model_idx;
    h["dispatch_model_idx"] = model.dispatch_model_idx;
    std::vector<double> blob;
    append_weights(model.mlp, blob);
    write_file(path, h, blob);
}

baseline::PointPredictor load_baseline(const std::string& path) {
    const RawFile f = read_file(path);
    if (f.header.at("kind").get<std::string>() != "baseline")
        throw ParseError(path + ": checkpoint kind is not \"baseline\"");
    baseline::PointPredictor m;
    m.normalizer = normalizer_from_json(f.header.at("normalizer"));
    m.layout = layout_from_json(f.header.at("layout"));
    m.load_model_idx = f.header.at("load_model_idx").get<std::vector<int>>();
    m.dispatch_model_idx = f.header.at("dispatch_model_idx").get<std::vector<int>>();
    m.mlp = mlp_from_blob(mlp_arch_from_json(f.header.at("arch")), f.blob);
    return m;
}

std::string peek_kind(const std::string& path) {
    return read_file(path).header.at("kind").get<std::string>();
}

}  // namespace diffopf::checkpoint
