#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

namespace diffopf::grid {

/// Flow-equation variant. `pi` is the full pi-model branch (v^2 self
/// terms, line charging, bus shunts); `paper` keeps only the v_i v_j
/// cross terms and ignores charging and shunts.
enum class FlowModel { pi, paper };

struct Bus {
    int id = 0;
    double v_min = 0.9;
    double v_max = 1.1;
    double g_sh = 0.0;
    double b_sh = 0.0;
    bool is_slack = false;
};

struct Generator {
    int bus = 0;  // bus id
    double p_min = 0.0, p_max = 0.0;
    double q_min = 0.0, q_max = 0.0;
    double cost_c2 = 0.0, cost_c1 = 0.0, cost_c0 = 0.0;
};

struct Line {
    int from = 0, to = 0;  // bus ids
    double g = 0.0, b = 0.0;  // series admittance
    double b_ch = 0.0;        // total charging susceptance
    double s_max = 0.0;       // apparent-power limit, both directions
};

struct PqPair {
    double p = 0.0, q = 0.0;
};

class Network {
public:
    double base_mva = 100.0;
    FlowModel flow_model = FlowModel::pi;
    std::vector<Bus> buses;
    std::vector<Generator> generators;
    std::vector<Line> lines;
    std::vector<PqPair> nominal_load;  // aligned with buses

    int n_buses() const { return static_cast<int>(buses.size()); }
    int n_gens() const { return static_cast<int>(generators.size()); }
    int n_lines() const { return static_cast<int>(lines.size()); }

    /// Position of a bus id in `buses`; throws if unknown.
    int bus_index(int bus_id) const;
    int slack_index() const;
    const std::vector<int>& gens_at_bus(int bus_idx) const;
    int line_from_index(int line_idx) const { return line_from_[line_idx]; }
    int line_to_index(int line_idx) const { return line_to_[line_idx]; }

    /// Checks every structural invariant; throws ValidationError naming
    /// the violated one. Also rebuilds the index tables, so call it after
    /// any mutation.
    void validate();

    bool operator==(const Network& other) const;

private:
    std::vector<int> line_from_, line_to_;      // line endpoints as bus indices
    std::vector<std::vector<int>> bus_gens_;    // generator indices per bus
    std::vector<int> id_order_;                 // bus ids sorted for lookup
    std::vector<int> id_to_index_;
};

/// Per-line series terms and per-bus shunts, indexed consistently with
/// `lines` and `buses`.
struct AdmittanceTerms {
    Eigen::VectorXd g, b, b_ch;        // per line
    Eigen::VectorXd g_sh, b_sh;        // per bus
};

Network load_case(const std::string& path);
Network parse_case(const std::string& json_text, const std::string& origin = "<string>");
std::string serialize_case(const Network& net);
void save_case(const Network& net, const std::string& path);

AdmittanceTerms admittance_terms(const Network& net);

}  // namespace diffopf::grid
