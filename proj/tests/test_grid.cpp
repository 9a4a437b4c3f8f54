#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "diffopf/errors.hpp"
#include "diffopf/grid.hpp"
#include "test_support.hpp"

using namespace diffopf;

TEST_CASE("2-bus case loads with the expected element counts") {
    const auto net = testsup::load_named_case("case2.json");
    CHECK(net.n_buses() == 2);
    CHECK(net.n_lines() == 1);
    CHECK(net.n_gens() == 1);
    CHECK(net.slack_index() == 0);
    CHECK(net.base_mva == 100.0);
}

TEST_CASE("5-bus benchmark transcription has 5 buses, 5 generators, 6 lines") {
    const auto net = testsup::load_named_case("case5_pjm.json");
    CHECK(net.n_buses() == 5);
    CHECK(net.n_gens() == 5);
    CHECK(net.n_lines() == 6);
    // slack at bus id 4
    CHECK(net.buses[static_cast<std::size_t>(net.slack_index())].id == 4);
    // total nominal load is 10 p.u.
    double total = 0.0;
    for (const auto& l : net.nominal_load) total += l.p;
    CHECK(total == doctest::Approx(10.0));
}

TEST_CASE("v_min > v_max is rejected naming the bus") {
    const std::string text = R"({
      "base_mva": 100.0,
      "buses": [
        {"id": 1, "v_min": 0.95, "v_max": 1.05, "is_slack": true},
        {"id": 3, "v_min": 1.2, "v_max": 1.05}
      ],
      "generators": [],
      "lines": [],
      "nominal_load": []
    })";
    CHECK_THROWS_WITH_AS(grid::parse_case(text), doctest::Contains("bus 3"), ValidationError);
}

TEST_CASE("slack count invariants") {
    const std::string none = R"({"base_mva": 100.0,
      "buses": [{"id": 1, "v_min": 0.9, "v_max": 1.1}],
      "generators": [], "lines": [], "nominal_load": []})";
    CHECK_THROWS_AS(grid::parse_case(none), ValidationError);

    const std::string two = R"({"base_mva": 100.0,
      "buses": [{"id": 1, "v_min": 0.9, "v_max": 1.1, "is_slack": true},
                {"id": 2, "v_min": 0.9, "v_max": 1.1, "is_slack": true}],
      "generators": [], "lines": [], "nominal_load": []})";
    CHECK_THROWS_AS(grid::parse_case(two), ValidationError);
}

TEST_CASE("line endpoints and generator buses must resolve") {
    const std::string bad_line = R"({"base_mva": 100.0,
      "buses": [{"id": 1, "v_min": 0.9, "v_max": 1.1, "is_slack": true},
                {"id": 2, "v_min": 0.9, "v_max": 1.1}],
      "generators": [],
      "lines": [{"from": 1, "to": 9, "r": 0.01, "x": 0.1, "s_max": 1.0}],
      "nominal_load": []})";
    CHECK_THROWS_AS(grid::parse_case(bad_line), ValidationError);

    const std::string bad_gen = R"({"base_mva": 100.0,
      "buses": [{"id": 1, "v_min": 0.9, "v_max": 1.1, "is_slack": true}],
      "generators": [{"bus": 7, "p_min": 0, "p_max": 1, "q_min": -1, "q_max": 1,
                      "cost_c2": 0, "cost_c1": 1, "cost_c0": 0}],
      "lines": [], "nominal_load": []})";
    CHECK_THROWS_AS(grid::parse_case(bad_gen), ValidationError);
}

TEST_CASE("series impedance converts to admittance") {
    const std::string tmpl = R"({"base_mva": 100.0,
      "buses": [{"id": 1, "v_min": 0.9, "v_max": 1.1, "is_slack": true},
                {"id": 2, "v_min": 0.9, "v_max": 1.1}],
      "generators": [],
      "lines": [{"from": 1, "to": 2, "r": %R%, "x": %X%, "s_max": 1.0}],
      "nominal_load": []})";
    auto with = [&](const std::string& r, const std::string& x) {
        std::string t = tmpl;
        t.replace(t.find("%R%"), 3, r);
        t.replace(t.find("%X%"), 3, x);
        return t;
    };

    SUBCASE("pure reactance") {
        const auto net = grid::parse_case(with("0.0", "1.0"));
        const auto terms = grid::admittance_terms(net);
        CHECK(terms.g[0] == doctest::Approx(0.0));
        CHECK(terms.b[0] == doctest::Approx(-1.0));
    }
    SUBCASE("hand-computed 1/(r+jx)") {
        const auto net = grid::parse_case(with("0.01", "0.1"));
        const auto terms = grid::admittance_terms(net);
        CHECK(terms.g[0] == doctest::Approx(0.01 / (0.01 * 0.01 + 0.1 * 0.1)).epsilon(1e-12));
        CHECK(terms.b[0] == doctest::Approx(-0.1 / (0.01 * 0.01 + 0.1 * 0.1)).epsilon(1e-12));
        CHECK(terms.g[0] == doctest::Approx(0.990099).epsilon(1e-4));
        CHECK(terms.b[0] == doctest::Approx(-9.90099).epsilon(1e-4));
    }
    SUBCASE("zero impedance is rejected at load time") {
        CHECK_THROWS_AS(grid::parse_case(with("0.0", "0.0")), ValidationError);
    }
}

TEST_CASE("serialize/parse round-trip reproduces the network field for field") {
    for (const char* name :
         {"case2.json", "case2_bimodal.json", "case3.json", "case5_pjm.json"}) {
        const auto net = testsup::load_named_case(name);
        const auto again = grid::parse_case(grid::serialize_case(net));
        CHECK(net == again);
        // and a second round trip is textually identical
        CHECK(grid::serialize_case(net) == grid::serialize_case(again));
    }
}

TEST_CASE("admittance terms are direction symmetric") {
    const auto net = testsup::load_named_case("case5_pjm.json");
    const auto t = grid::admittance_terms(net);
    // both orientations of a line read the same series values by
    // construction; check the arrays line up with the line list
    for (int l = 0; l < net.n_lines(); ++l) {
        CHECK(t.g[l] == net.lines[static_cast<std::size_t>(l)].g);
        CHECK(t.b[l] == net.lines[static_cast<std::size_t>(l)].b);
        CHECK(t.b_ch[l] == net.lines[static_cast<std::size_t>(l)].b_ch);
    }
}

TEST_CASE("giving both (r,x) and (g,b) is a parse error") {
    const std::string text = R"({"base_mva": 100.0,
      "buses": [{"id": 1, "v_min": 0.9, "v_max": 1.1, "is_slack": true},
                {"id": 2, "v_min": 0.9, "v_max": 1.1}],
      "generators": [],
      "lines": [{"from": 1, "to": 2, "r": 0.01, "x": 0.1, "g": 1.0, "b": -10.0, "s_max": 1}],
      "nominal_load": []})";
    CHECK_THROWS_AS(grid::parse_case(text), ParseError);
}
