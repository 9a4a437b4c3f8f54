#include "diffopf/grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "diffopf/errors.hpp"

namespace diffopf::grid {

using nlohmann::json;

namespace {

std::string at(const std::string& origin, const std::string& where) {
    return origin + ": " + where;
}

double require_number(const json& obj, const char* key, const std::string& ctx,
                      const std::string& origin) {
    if (!obj.contains(key))
        throw ParseError(at(origin, ctx + ": missing field '" + key + "'"));
    if (!obj[key].is_number())
        throw ParseError(at(origin, ctx + ": field '" + key + "' must be a number"));
    return obj[key].get<double>();
}

int require_int(const json& obj, const char* key, const std::string& ctx,
                const std::string& origin) {
    if (!obj.contains(key))
        throw ParseError(at(origin, ctx + ": missing field '" + key + "'"));
    if (!obj[key].is_number_integer())
        throw ParseError(at(origin, ctx + ": field '" + key + "' must be an integer"));
    return obj[key].get<int>();
}

}  // namespace

int Network::bus_index(int bus_id) const {
    auto it = std::lower_bound(id_order_.begin(), id_order_.end(), bus_id);
    if (it == id_order_.end() || *it != bus_id)
        throw ValidationError("unknown bus id " + std::to_string(bus_id));
    return id_to_index_[static_cast<std::size_t>(it - id_order_.begin())];
}

int Network::slack_index() const {
    for (int i = 0; i < n_buses(); ++i)
        if (buses[static_cast<std::size_t>(i)].is_slack) return i;
    throw ValidationError("network has no slack bus");
}

const std::vector<int>& Network::gens_at_bus(int bus_idx) const {
    return bus_gens_[static_cast<std::size_t>(bus_idx)];
}

void Network::validate() {
    if (buses.empty()) throw ValidationError("network must contain at least one bus");
    if (!(base_mva > 0.0)) throw ValidationError("base_mva must be positive");

    id_order_.clear();
    for (const auto& b : buses) id_order_.push_back(b.id);
    std::vector<int> perm(buses.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
    std::sort(perm.begin(), perm.end(),
              [&](int a, int b) { return id_order_[static_cast<std::size_t>(a)] < id_order_[static_cast<std::size_t>(b)]; });
    std::sort(id_order_.begin(), id_order_.end());
    for (std::size_t i = 1; i < id_order_.size(); ++i)
        if (id_order_[i] == id_order_[i - 1])
            throw ValidationError("duplicate bus id " + std::to_string(id_order_[i]));
    id_to_index_ = perm;

    int n_slack = 0;
    for (const auto& b : buses) {
        if (!(b.v_min > 0.0))
            throw ValidationError("bus " + std::to_string(b.id) + ": v_min must be positive");
        if (b.v_min > b.v_max)
            throw ValidationError("bus " + std::to_string(b.id) + ": v_min > v_max");
        if (b.is_slack) ++n_slack;
    }
    if (n_slack != 1)
        throw ValidationError("network must have exactly one slack bus, found " +
                              std::to_string(n_slack));

    bus_gens_.assign(buses.size(), {});
    for (std::size_t gi = 0; gi < generators.size(); ++gi) {
        const auto& g = generators[gi];
        if (g.p_min > g.p_max)
            throw ValidationError("generator " + std::to_string(gi) + ": p_min > p_max");
        if (g.q_min > g.q_max)
            throw ValidationError("generator " + std::to_string(gi) + ": q_min > q_max");
        if (g.cost_c2 < 0.0)
            throw ValidationError("generator " + std::to_string(gi) + ": cost_c2 must be >= 0");
        bus_gens_[static_cast<std::size_t>(bus_index(g.bus))].push_back(static_cast<int>(gi));
    }

    line_from_.clear();
    line_to_.clear();
    for (std::size_t li = 0; li < lines.size(); ++li) {
        const auto& l = lines[li];
        if (l.from == l.to)
            throw ValidationError("line " + std::to_string(li) + ": from == to");
        if (!(l.s_max > 0.0))
            throw ValidationError("line " + std::to_string(li) + ": s_max must be positive");
        if (l.g * l.g + l.b * l.b == 0.0)
            throw ValidationError("line " + std::to_string(li) + ": zero admittance");
        line_from_.push_back(bus_index(l.from));
        line_to_.push_back(bus_index(l.to));
    }

    if (nominal_load.size() != buses.size())
        throw ValidationError("nominal_load must cover every bus");
}

bool Network::operator==(const Network& other) const {
    auto bus_eq = [](const Bus& a, const Bus& b) {
        return a.id == b.id && a.v_min == b.v_min && a.v_max == b.v_max && a.g_sh == b.g_sh &&
               a.b_sh == b.b_sh && a.is_slack == b.is_slack;
    };
    auto gen_eq = [](const Generator& a, const Generator& b) {
        return a.bus == b.bus && a.p_min == b.p_min && a.p_max == b.p_max && a.q_min == b.q_min &&
               a.q_max == b.q_max && a.cost_c2 == b.cost_c2 && a.cost_c1 == b.cost_c1 &&
               a.cost_c0 == b.cost_c0;
    };
    auto line_eq = [](const Line& a, const Line& b) {
        return a.from == b.from && a.to == b.to && a.g == b.g && a.b == b.b && a.b_ch == b.b_ch &&
               a.s_max == b.s_max;
    };
    if (base_mva != other.base_mva || flow_model != other.flow_model) return false;
    if (buses.size() != other.buses.size() || generators.size() != other.generators.size() ||
        lines.size() != other.lines.size())
        return false;
    for (std::size_t i = 0; i < buses.size(); ++i)
        if (!bus_eq(buses[i], other.buses[i])) return false;
    for (std::size_t i = 0; i < generators.size(); ++i)
        if (!gen_eq(generators[i], other.generators[i])) return false;
    for (std::size_t i = 0; i < lines.size(); ++i)
        if (!line_eq(lines[i], other.lines[i])) return false;
    for (std::size_t i = 0; i < nominal_load.size(); ++i)
        if (nominal_load[i].p != other.nominal_load[i].p ||
            nominal_load[i].q != other.nominal_load[i].q)
            return false;
    return true;
}

Network parse_case(const std::string& text, const std::string& origin) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(at(origin, e.what()));
    }
    if (!doc.is_object()) throw ParseError(at(origin, "top level must be an object"));

    Network net;
    net.base_mva = require_number(doc, "base_mva", "top level", origin);

    if (doc.contains("flow_model")) {
        const std::string fm = doc["flow_model"].get<std::string>();
        if (fm == "pi")
            net.flow_model = FlowModel::pi;
        else if (fm == "paper")
            net.flow_model = FlowModel::paper;
        else
            throw ParseError(at(origin, "flow_model must be \"pi\" or \"paper\""));
    }

    if (!doc.contains("buses") || !doc["buses"].is_array())
        throw ParseError(at(origin, "missing array 'buses'"));
    for (std::size_t i = 0; i < doc["buses"].size(); ++i) {
        const auto& jb = doc["buses"][i];
        const std::string ctx = "buses[" + std::to_string(i) + "]";
        Bus b;
        b.id = require_int(jb, "id", ctx, origin);
        b.v_min = require_number(jb, "v_min", ctx, origin);
        b.v_max = require_number(jb, "v_max", ctx, origin);
        b.g_sh = jb.value("g_sh", 0.0);
        b.b_sh = jb.value("b_sh", 0.0);
        b.is_slack = jb.value("is_slack", false);
        net.buses.push_back(b);
    }

    if (!doc.contains("generators") || !doc["generators"].is_array())
        throw ParseError(at(origin, "missing array 'generators'"));
    for (std::size_t i = 0; i < doc["generators"].size(); ++i) {
        const auto& jg = doc["generators"][i];
        const std::string ctx = "generators[" + std::to_string(i) + "]";
        Generator g;
        g.bus = require_int(jg, "bus", ctx, origin);
        g.p_min = require_number(jg, "p_min", ctx, origin);
        g.p_max = require_number(jg, "p_max", ctx, origin);
        g.q_min = require_number(jg, "q_min", ctx, origin);
        g.q_max = require_number(jg, "q_max", ctx, origin);
        g.cost_c2 = require_number(jg, "cost_c2", ctx, origin);
        g.cost_c1 = require_number(jg, "cost_c1", ctx, origin);
        g.cost_c0 = require_number(jg, "cost_c0", ctx, origin);
        net.generators.push_back(g);
    }

    if (!doc.contains("lines") || !doc["lines"].is_array())
        throw ParseError(at(origin, "missing array 'lines'"));
    for (std::size_t i = 0; i < doc["lines"].size(); ++i) {
        const auto& jl = doc["lines"][i];
        const std::string ctx = "lines[" + std::to_string(i) + "]";
        Line l;
        l.from = require_int(jl, "from", ctx, origin);
        l.to = require_int(jl, "to", ctx, origin);
        // Series parameters come either as impedance (r, x) or directly
        // as admittance (g, b).
        const bool has_rx = jl.contains("r") || jl.contains("x");
        const bool has_gb = jl.contains("g") || jl.contains("b");
        if (has_rx && has_gb)
            throw ParseError(at(origin, ctx + ": give either (r, x) or (g, b), not both"));
        if (has_rx) {
            const double r = require_number(jl, "r", ctx, origin);
            const double x = require_number(jl, "x", ctx, origin);
            const double z2 = r * r + x * x;
            if (z2 == 0.0)
                throw ValidationError(at(origin, ctx + ": zero series impedance"));
            l.g = r / z2;
            l.b = -x / z2;
        } else if (has_gb) {
            l.g = require_number(jl, "g", ctx, origin);
            l.b = require_number(jl, "b", ctx, origin);
        } else {
            throw ParseError(at(origin, ctx + ": missing series parameters (r, x) or (g, b)"));
        }
        l.b_ch = jl.value("b_ch", 0.0);
        l.s_max = require_number(jl, "s_max", ctx, origin);
        net.lines.push_back(l);
    }

    net.nominal_load.assign(net.buses.size(), PqPair{});
    if (doc.contains("nominal_load")) {
        if (!doc["nominal_load"].is_array())
            throw ParseError(at(origin, "'nominal_load' must be an array"));
        // Needs bus lookup before full validation; build a temporary map.
        for (std::size_t i = 0; i < doc["nominal_load"].size(); ++i) {
            const auto& jn = doc["nominal_load"][i];
            const std::string ctx = "nominal_load[" + std::to_string(i) + "]";
            const int bus_id = require_int(jn, "bus", ctx, origin);
            int idx = -1;
            for (int bi = 0; bi < net.n_buses(); ++bi)
                if (net.buses[static_cast<std::size_t>(bi)].id == bus_id) idx = bi;
            if (idx < 0)
                throw ValidationError(at(origin, ctx + ": unknown bus id " + std::to_string(bus_id)));
            net.nominal_load[static_cast<std::size_t>(idx)].p = require_number(jn, "p_d", ctx, origin);
            net.nominal_load[static_cast<std::size_t>(idx)].q = require_number(jn, "q_d", ctx, origin);
        }
    }

    net.validate();
    return net;
}

Network load_case(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingArtifactError("case file not found: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_case(ss.str(), path);
}

std::string serialize_case(const Network& net) {
    json doc;
    doc["base_mva"] = net.base_mva;
    doc["flow_model"] = net.flow_model == FlowModel::pi ? "pi" : "paper";
    doc["buses"] = json::array();
    for (const auto& b : net.buses) {
        json jb = {{"id", b.id},    {"v_min", b.v_min}, {"v_max", b.v_max},
                   {"g_sh", b.g_sh}, {"b_sh", b.b_sh},   {"is_slack", b.is_slack}};
        doc["buses"].push_back(jb);
    }
    doc["generators"] = json::array();
    for (const auto& g : net.generators) {
        json jg = {{"bus", g.bus},        {"p_min", g.p_min},     {"p_max", g.p_max},
                   {"q_min", g.q_min},    {"q_max", g.q_max},     {"cost_c2", g.cost_c2},
                   {"cost_c1", g.cost_c1}, {"cost_c0", g.cost_c0}};
        doc["generators"].push_back(jg);
    }
    doc["lines"] = json::array();
    for (const auto& l : net.lines) {
        json jl = {{"from", l.from}, {"to", l.to},     {"g", l.g},
                   {"b", l.b},       {"b_ch", l.b_ch}, {"s_max", l.s_max}};
        doc["lines"].push_back(jl);
    }
    doc["nominal_load"] = json::array();
    for (std::size_t i = 0; i < net.nominal_load.size(); ++i) {
        json jn = {{"bus", net.buses[i].id},
                   {"p_d", net.nominal_load[i].p},
                   {"q_d", net.nominal_load[i].q}};
        doc["nominal_load"].push_back(jn);
    }
    return doc.dump(2) + "\n";
}

void save_case(const Network& net, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write case file: " + path);
    out << serialize_case(net);
}

AdmittanceTerms admittance_terms(const Network& net) {
    AdmittanceTerms t;
    const int nl = net.n_lines();
    const int nb = net.n_buses();
    t.g.resize(nl);
    t.b.resize(nl);
    t.b_ch.resize(nl);
    for (int l = 0; l < nl; ++l) {
        t.g[l] = net.lines[static_cast<std::size_t>(l)].g;
        t.b[l] = net.lines[static_cast<std::size_t>(l)].b;
        t.b_ch[l] = net.lines[static_cast<std::size_t>(l)].b_ch;
    }
    t.g_sh.resize(nb);
    t.b_sh.resize(nb);
    for (int b = 0; b < nb; ++b) {
        t.g_sh[b] = net.buses[static_cast<std::size_t>(b)].g_sh;
        t.b_sh[b] = net.buses[static_cast<std::size_t>(b)].b_sh;
    }
    return t;
}

}  // namespace diffopf::grid
