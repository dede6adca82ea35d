#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nlbs/scenario.hpp"
#include "nlbs/validation.hpp"

namespace {

constexpr int k_exit_ok = 0;
constexpr int k_exit_domain = 2;
constexpr int k_exit_no_convergence = 3;
constexpr int k_exit_singular = 4;

std::string default_out_dir() {
    const char* env = std::getenv("NLBS_OUT_DIR");
    return env && *env ? env : ".";
}

struct Options {
    std::string scenario_path;
    std::string out_dir = default_out_dir();
    std::string check = "all";
    std::string format = "csv";
};

int run_files(const nlbs::Scenario& s, const std::string& out_dir) {
    const auto written = nlbs::run_scenario(s, out_dir);
    for (const auto& f : written) std::cout << "wrote " << out_dir << "/" << f << '\n';
    return k_exit_ok;
}

int dispatch(const std::string& command, const Options& opt) {
    if (opt.format != "csv") throw std::domain_error("only --format csv is supported");

    if (command == "validate" && opt.scenario_path.empty()) {
        // report-only invocation: no scenario file required
        std::vector<std::string> checks;
        if (opt.check == "all")
            checks = nlbs::validation::check_names();
        else
            checks.push_back(opt.check);
        const auto reports = nlbs::validation::run_all(checks);
        const std::string path = opt.out_dir + "/validation_report.txt";
        nlbs::validation::write_report_file(path, reports);
        nlbs::validation::write_report(std::cout, reports);
        std::cout << "wrote " << path << '\n';
        return k_exit_ok;
    }

    nlbs::Scenario s = nlbs::parse_scenario(opt.scenario_path);
    if (command == "price") {
        return run_files(s, opt.out_dir);
    }
    if (command == "closed-form") {
        s.method = nlbs::Method::closed_form;
        if (!s.closed_form)
            throw nlbs::ScenarioError(opt.scenario_path +
                                      ": field closed_form.m: required for closed-form");
        if (s.outputs.empty() ||
            (s.outputs.size() == 1 && s.outputs[0] == nlbs::OutputKind::slice_at_t0))
            s.outputs = {nlbs::OutputKind::surface};
        return run_files(s, opt.out_dir);
    }
    if (command == "greeks") {
        s.outputs = {nlbs::OutputKind::greeks};
        return run_files(s, opt.out_dir);
    }
    if (command == "compare") {
        s.compare_linear = true;
        s.outputs = {nlbs::OutputKind::slice_at_t0};
        return run_files(s, opt.out_dir);
    }
    if (command == "validate") {
        if (opt.check == "all" && s.validation_checks.empty())
            s.validation_checks = nlbs::validation::check_names();
        else if (opt.check != "all")
            s.validation_checks = {opt.check};
        s.outputs = {nlbs::OutputKind::validation};
        return run_files(s, opt.out_dir);
    }
    throw std::domain_error("unknown command " + command);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Option hedge costs under the large-trader illiquidity model: closed-form\n"
        "invariant solutions of the nonlinear Black-Scholes equation, a validated\n"
        "fully implicit solver, and the reproduction checks."};
    app.require_subcommand(1);

    Options opt;
    std::string command;
    for (const char* name : {"price", "closed-form", "greeks", "validate", "compare"}) {
        CLI::App* sub = app.add_subcommand(name);
        if (std::string(name) == "validate") {
            sub->add_option("--scenario", opt.scenario_path,
                            "scenario file (optional for validate)");
            sub->add_option("--check", opt.check, "check name or 'all'")
                ->default_str("all");
        } else {
            sub->add_option("--scenario", opt.scenario_path, "scenario file (key = value lines)")
                ->required();
        }
        sub->add_option("--out", opt.out_dir, "output directory")
            ->default_str(default_out_dir());
        sub->add_option("--format", opt.format, "output format")->default_str("csv");
        sub->callback([&command, name] { command = name; });
    }
    app.footer(
        "Subcommands:\n"
        "  price        run the scenario with its configured method and outputs\n"
        "  closed-form  evaluate the invariant-family member (default output: surface)\n"
        "  greeks       emit delta/gamma/theta/vega on the scenario grid\n"
        "  validate     run reproduction checks and write the report file\n"
        "  compare      method series vs the linear model, plus their difference\n"
        "Scenario defaults: method=implicit, solver.newton_tol=1e-12,\n"
        "solver.newton_max_iter=100, solver.damping_max_halvings=40,\n"
        "solver.initial_guess=warm-start, solver.guess_constant=0.03,\n"
        "solver.boundary=payoff, solver.jacobian=analytic,\n"
        "solver.terminal_smoothing=0, payoff.quantity=1, outputs=slice.\n"
        "Exit codes: 0 ok, 2 domain/validation error, 3 no convergence,\n"
        "4 singular denominator. NLBS_OUT_DIR sets the default output directory.");

    try {
        CLI11_PARSE(app, argc, argv);
        return dispatch(command, opt);
    } catch (const nlbs::NoConvergence& e) {
        std::cerr << "error: " << e.what() << '\n';
        return k_exit_no_convergence;
    } catch (const nlbs::SingularDenominator& e) {
        std::cerr << "error: " << e.what() << '\n';
        return k_exit_singular;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return k_exit_domain;
    }
}
