#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "nlbs/scenario.hpp"

using namespace nlbs;

namespace {

std::string minimal_scenario() {
    return "market.sigma = 0.35\n"
           "market.rho = 0.1\n"
           "grid.s_min = 0.1\n"
           "grid.s_max = 2.0\n"
           "grid.n_space = 39\n"
           "grid.n_time = 18\n"
           "grid.maturity = 0.9\n"
           "payoff.kind = call\n"
           "payoff.strike = 0.914\n"
           "method = implicit\n";
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("minimal scenario parses with defaults") {
    const Scenario s = parse_scenario_text(minimal_scenario(), "mini");
    CHECK(s.name == "mini");
    CHECK(s.method == Method::fully_implicit);
    CHECK(s.solver.newton_tol == 1e-12);
    CHECK(s.solver.initial_guess == InitialGuess::warm_start);
    CHECK(s.solver.guess_constant == 0.03);
    CHECK(s.outputs.size() == 1);
    CHECK(s.outputs[0] == OutputKind::slice_at_t0);
    CHECK(std::get<Call>(s.payoff).quantity == 1.0);
}

TEST_CASE("rho = 0 with the nonlinear solver is a validation error") {
    std::string text = minimal_scenario();
    text.replace(text.find("market.rho = 0.1"), 16, "market.rho = 0.0");
    CHECK_THROWS_WITH_AS(parse_scenario_text(text, "x"),
                         doctest::Contains("market.rho"), ScenarioError);
    // but the linear reference accepts it
    text += "\n";
    text.replace(text.find("method = implicit"), 17, "method = linear-fd");
    CHECK_NOTHROW(parse_scenario_text(text, "x"));
}

TEST_CASE("parse errors carry line numbers; unknown fields are rejected") {
    CHECK_THROWS_WITH_AS(parse_scenario_text("market.sigma 0.35\n", "f"),
                         doctest::Contains("line 1"), ScenarioError);
    CHECK_THROWS_WITH_AS(parse_scenario_text(minimal_scenario() + "payof.kind = call\n", "f"),
                         doctest::Contains("unknown field payof.kind"), ScenarioError);
    CHECK_THROWS_WITH_AS(parse_scenario_text(minimal_scenario() + "method = magic\n", "f"),
                         doctest::Contains("method"), ScenarioError);
}

TEST_CASE("closed-form method requires family constants") {
    std::string text = minimal_scenario();
    text.replace(text.find("method = implicit"), 17, "method = closed-form");
    CHECK_THROWS_WITH_AS(parse_scenario_text(text, "f"), doctest::Contains("closed_form.m"),
                         ScenarioError);
    text += "closed_form.m = 0.5\n";
    const Scenario s = parse_scenario_text(text, "f");
    REQUIRE(s.closed_form.has_value());
    CHECK(s.closed_form->delta == doctest::Approx(0.35 * 0.35 / 8.0));
}

TEST_CASE("shipped fig9 scenario parses to the spread configuration") {
    const Scenario s = parse_scenario(std::string(NLBS_SCENARIO_DIR) + "/fig9.scenario");
    CHECK(s.market.sigma == 0.35);
    CHECK(s.market.rate == 0.02);
    CHECK(s.grid.s_min == 20.0);
    CHECK(s.grid.s_max == 140.0);
    CHECK(s.grid.n_space == 61);
    CHECK(s.grid.n_time == 20);
    CHECK(s.grid.maturity == 1.0);
    CHECK(s.sweep_rho == std::vector<double>{0.05, 0.1, 0.2});
    const auto& spread = std::get<BullSpread>(s.payoff);
    CHECK(spread.e_long == 60.0);
    CHECK(spread.e_short == 80.0);
    CHECK(s.compare_linear);
}

TEST_CASE("all shipped figure scenarios parse") {
    for (int i = 1; i <= 9; ++i) {
        const std::string path =
            std::string(NLBS_SCENARIO_DIR) + "/fig" + std::to_string(i) + ".scenario";
        CHECK_NOTHROW(parse_scenario(path));
    }
    CHECK_NOTHROW(parse_scenario(std::string(NLBS_SCENARIO_DIR) + "/validate.scenario"));
}

TEST_CASE("run_scenario writes deterministic CSV output") {
    const auto dir = std::filesystem::temp_directory_path() / "nlbs_scenario_test";
    std::filesystem::remove_all(dir);

    std::string text = minimal_scenario();
    text.replace(text.find("grid.n_time = 18"), 16, "grid.n_time = 6");
    text += "name = smoke\noutputs = slice\nsweep.rho = 0.05, 0.1\ncompare = true\n";
    const Scenario s = parse_scenario_text(text, "smoke");

    const auto written = run_scenario(s, dir.string());
    REQUIRE(written.size() == 1);
    const auto path = dir / written[0];
    REQUIRE(std::filesystem::exists(path));
    const std::string first = read_file(path);
    CHECK(first.find("series,S,u") != std::string::npos);
    CHECK(first.find("rho=0.05") != std::string::npos);
    CHECK(first.find("linear") != std::string::npos);
    CHECK(first.find("# method=implicit") != std::string::npos);

    run_scenario(s, dir.string());
    CHECK(read_file(path) == first);  // bit-identical rerun
    std::filesystem::remove_all(dir);
}

TEST_CASE("closed-form surface output covers the grid") {
    const auto dir = std::filesystem::temp_directory_path() / "nlbs_surface_test";
    std::filesystem::remove_all(dir);
    std::string text =
        "name = fig1-like\n"
        "market.sigma = 0.35\nmarket.rho = 0.1\n"
        "grid.s_min = 0.02\ngrid.s_max = 2.0\ngrid.n_space = 12\ngrid.n_time = 4\n"
        "grid.maturity = 1.0\n"
        "method = closed-form\nclosed_form.m = 0.5\n"
        "payoff.kind = closed-form-snapshot\noutputs = surface\n";
    const Scenario s = parse_scenario_text(text, "fig1-like");
    const auto written = run_scenario(s, dir.string());
    const std::string body = read_file(dir / written[0]);
    // 12 nodes * 5 layers data rows plus header and metadata
    CHECK(std::count(body.begin(), body.end(), '\n') >= 12 * 5 + 1);
    CHECK(body.find("S,t,u") != std::string::npos);
    std::filesystem::remove_all(dir);
}

TEST_CASE("validation-only scenario needs no market block") {
    const Scenario s = parse_scenario_text("outputs = validation\nvalidation.checks = all\n", "v");
    CHECK(s.validation_checks.size() == 6);
}
