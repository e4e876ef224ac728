#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "parmp/reports.hpp"
#include "parmp/scenario.hpp"
#include "parmp/solver.hpp"

using namespace parmp;

namespace {

json minimal_scenario_json() {
    return json::parse(R"({
  "name": "mini",
  "n": 1, "k": 1,
  "grid": {"lo": [0.0], "hi": [1.0], "points": [11]},
  "a": [["1"]],
  "D": [["1"]],
  "phi": ["0"],
  "K": {"type": "box", "lo": [0.0], "hi": [1.0]},
  "initial": ["0.5"],
  "boundary": ["0.5"],
  "t_end": 0.1,
  "snapshot_interval": 0.05
})");
}

}  // namespace

TEST_CASE("builtin library is loadable and complete", "[scenario]") {
    const auto names = builtin_scenario_names();
    for (const char* required : {"heat-interval", "ball-sink", "simplex-face",
                                 "anisotropic-2d", "incompatible-sink"}) {
        REQUIRE(std::find(names.begin(), names.end(), required) != names.end());
    }
    for (const auto& name : names) {
        const Scenario scn = load_scenario(name);
        REQUIRE(scn.name == name);
        REQUIRE(scn.t_end > 0.0);
    }
}

TEST_CASE("heat-interval builtin matches its definition", "[scenario]") {
    const Scenario scn = load_scenario("heat-interval");
    REQUIRE(scn.spec.n == 1);
    REQUIRE(scn.spec.k == 1);
    REQUIRE(scn.K.kind() == ConvexBody::Kind::HPolytope);
    REQUIRE(scn.grid.npts[0] == 101);
    // u0(0.5) = 0.5 + 0.4 sin(pi/2) = 0.9
    double x = 0.5;
    EvalEnv env;
    env.x = &x;
    env.n = 1;
    REQUIRE(evaluate_expression(*scn.initial[0], env) == Catch::Approx(0.9).margin(1e-12));
    REQUIRE(evaluate_expression(*scn.boundary[0], env) == 0.5);
}

TEST_CASE("simplex-face builtin pins the second component to the face", "[scenario]") {
    const Scenario scn = load_scenario("simplex-face");
    REQUIRE(scn.spec.k == 2);
    REQUIRE(scn.K.kind() == ConvexBody::Kind::HPolytope);
    REQUIRE(scn.K.facets().size() == 3);
    double x = 0.3;
    EvalEnv env;
    env.x = &x;
    env.n = 1;
    REQUIRE(evaluate_expression(*scn.initial[1], env) == 0.0);
}

TEST_CASE("unknown scenario names list the library", "[scenario]") {
    try {
        load_scenario("does-not-exist");
        FAIL("expected ScenarioError");
    } catch (const ScenarioError& se) {
        const std::string msg = se.what();
        REQUIRE(msg.find("heat-interval") != std::string::npos);
        REQUIRE(msg.find("ball-sink") != std::string::npos);
    }
}

TEST_CASE("scenario files load from disk", "[scenario]") {
    const auto path = std::filesystem::temp_directory_path() / "parmp_test_scn.json";
    {
        std::ofstream out(path);
        out << minimal_scenario_json().dump(2);
    }
    const Scenario scn = load_scenario(path.string());
    REQUIRE(scn.name == "mini");
    REQUIRE(scn.grid.npts[0] == 11);
    std::filesystem::remove(path);
}

TEST_CASE("validation names the offending field", "[scenario]") {
    // Wrong number of initial expressions.
    {
        json j = minimal_scenario_json();
        j["k"] = 2;
        j["D"] = json::array({json::array({"1", "0"}), json::array({"0", "1"})});
        j["phi"] = json::array({"0", "0"});
        j["K"] = {{"type", "box"}, {"lo", {0.0, 0.0}}, {"hi", {1.0, 1.0}}};
        j["boundary"] = json::array({"0.5", "0.5"});
        // initial still has one expression
        try {
            scenario_from_json(j, "bad");
            FAIL("expected ScenarioError");
        } catch (const ScenarioError& se) {
            REQUIRE(std::string(se.what()).find("initial data: expected 2 expressions") !=
                    std::string::npos);
        }
    }
    // Asymmetric a.
    {
        json j = minimal_scenario_json();
        j["n"] = 2;
        j["grid"] = {{"lo", {0.0, 0.0}}, {"hi", {1.0, 1.0}}, {"points", {5, 5}}};
        j["a"] = {{"1", "0.2"}, {"0.3", "1"}};
        REQUIRE_THROWS_WITH(scenario_from_json(j, "bad"),
                            Catch::Matchers::ContainsSubstring("symmetric"));
    }
    // Snapshot interval must divide t_end.
    {
        json j = minimal_scenario_json();
        j["snapshot_interval"] = 0.03;
        REQUIRE_THROWS_WITH(scenario_from_json(j, "bad"),
                            Catch::Matchers::ContainsSubstring("divide"));
    }
    // K dimension mismatch.
    {
        json j = minimal_scenario_json();
        j["K"] = {{"type", "box"}, {"lo", {0.0, 0.0}}, {"hi", {1.0, 1.0}}};
        REQUIRE_THROWS_WITH(scenario_from_json(j, "bad"),
                            Catch::Matchers::ContainsSubstring("K"));
    }
    // z variables are not allowed in initial data.
    {
        json j = minimal_scenario_json();
        j["initial"] = {"z1"};
        REQUIRE_THROWS_WITH(scenario_from_json(j, "bad"),
                            Catch::Matchers::ContainsSubstring("initial[0]"));
    }
    // Unknown body type.
    {
        json j = minimal_scenario_json();
        j["K"] = {{"type", "simplex"}};
        REQUIRE_THROWS_AS(scenario_from_json(j, "bad"), ScenarioError);
    }
    // Too few grid points.
    {
        json j = minimal_scenario_json();
        j["grid"]["points"] = {2};
        REQUIRE_THROWS_WITH(scenario_from_json(j, "bad"),
                            Catch::Matchers::ContainsSubstring("grid"));
    }
}

TEST_CASE("grid spacing override recomputes point counts", "[scenario]") {
    Scenario scn = load_scenario("heat-interval");
    override_grid_spacing(scn, 0.005);
    REQUIRE(scn.grid.npts[0] == 201);
    REQUIRE(scn.grid.h[0] == Catch::Approx(0.005).margin(1e-15));
}

TEST_CASE("expression round trip over the whole scenario library", "[scenario]") {
    for (const auto& [name, src] : scenario_detail::builtin_sources()) {
        const json j = json::parse(src);
        const int n = j.at("n").get<int>();
        const int k = j.at("k").get<int>();
        std::vector<std::string> exprs;
        auto collect = [&](const json& node, auto&& self) -> void {
            if (node.is_string()) {
                exprs.push_back(node.get<std::string>());
            } else if (node.is_array()) {
                for (const auto& c : node) self(c, self);
            }
        };
        for (const char* key : {"a", "D", "M", "phi", "initial", "boundary"}) {
            if (j.contains(key)) collect(j.at(key), collect);
        }
        REQUIRE_FALSE(exprs.empty());
        for (const auto& src_expr : exprs) {
            const auto ast = parse_expression(src_expr, ExprDims{n, k});
            const auto reparsed = parse_expression(print_expression(*ast), ExprDims{n, k});
            INFO(name << ": " << src_expr);
            REQUIRE(expr_equal(*ast, *reparsed));
        }
    }
}

TEST_CASE("json reports carry 17 significant digits and reload exactly",
          "[scenario]") {
    ordered_json j;
    j["check"] = "demo";
    j["value"] = 0.1;
    j["third"] = 1.0 / 3.0;
    j["list"] = ordered_json::array({2.0, 0.30000000000000004});
    const std::string text = dump_json(j);
    REQUIRE(text.find("0.10000000000000001") != std::string::npos);
    const json back = json::parse(text);
    REQUIRE(back.at("value").get<double>() == 0.1);
    REQUIRE(back.at("third").get<double>() == 1.0 / 3.0);
    REQUIRE(back.at("list")[1].get<double>() == 0.30000000000000004);
}

TEST_CASE("weak MP report serializes and reloads field by field", "[scenario]") {
    Scenario scn = load_scenario("heat-interval");
    override_grid_spacing(scn, 0.02);
    scn.t_end = 0.01;
    scn.snapshot_interval = 0.0025;
    const Trajectory traj = run_scenario(scn);
    const auto rep = weak_mp_check(traj, scn.K, scn.tol.membership);
    const ordered_json j = to_json(rep, scn.spec.n);
    const json back = json::parse(dump_json(j));
    REQUIRE(back.at("check").get<std::string>() == "weak_mp");
    REQUIRE(back.at("pass").get<bool>() == (rep.status == CheckStatus::Pass));
    REQUIRE(back.at("worst_signed_distance").get<double>() == rep.worst_signed_distance);
    REQUIRE(back.at("tol").get<double>() == rep.tol);
    REQUIRE(back.at("worst_location").at("node").get<int>() == rep.worst.node);
    REQUIRE(back.at("worst_location").at("t").get<double>() == rep.worst.t);
}

TEST_CASE("non-finite values serialize as null", "[scenario]") {
    ordered_json j;
    j["inf"] = std::numeric_limits<double>::infinity();
    const std::string text = dump_json(j);
    REQUIRE(text.find("null") != std::string::npos);
    REQUIRE_NOTHROW(json::parse(text));
}
