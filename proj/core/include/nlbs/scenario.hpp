#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nlbs/fd_solver.hpp"
#include "nlbs/types.hpp"

namespace nlbs {

enum class Method {
    closed_form,
    fully_implicit,
    forward_explicit,
    linear_analytic,
    linear_fd,
};

enum class OutputKind { surface, greeks, slice_at_t0, validation };

enum class VegaSign { standard, figure };  ///< figure convention flips to -du/dsigma

/// Everything needed to run one pricing job: market, grid, payoff, method and
/// solver settings, parsed from a flat key = value file.
struct Scenario {
    std::string name;
    MarketParams market;
    GridSpec grid;
    Payoff payoff = Call{};
    Method method = Method::fully_implicit;
    SolverConfig solver;
    std::optional<ClosedFormParams> closed_form;
    std::vector<OutputKind> outputs;
    VegaSign vega_sign = VegaSign::standard;

    // optional sweeps: one output series per value
    std::vector<double> sweep_rho;
    std::vector<double> sweep_quantity;
    // when set, comparison runs add a linear reference series
    bool compare_linear = false;

    std::vector<std::string> validation_checks;  ///< for OutputKind::validation
};

/// Parse errors carry the offending line; validation errors name the field.
struct ScenarioError : std::runtime_error {
    explicit ScenarioError(const std::string& what) : std::runtime_error(what) {}
};

Scenario parse_scenario(const std::string& path);
Scenario parse_scenario_text(const std::string& text, const std::string& origin = "<string>");

/// Runs the scenario and writes the requested CSV files into out_dir.
/// Returns the list of files written.
std::vector<std::string> run_scenario(const Scenario& s, const std::string& out_dir);

}  // namespace nlbs
