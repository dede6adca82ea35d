#include "nlbs/validation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "nlbs/closed_form.hpp"
#include "nlbs/fd_solver.hpp"
#include "nlbs/model.hpp"

namespace nlbs::validation {
namespace {

// ---------------------------------------------------------------------------
// Pinned configurations
// ---------------------------------------------------------------------------

// Benchmark problem: the m = 0.5 family member on the figure domain. The
// horizon is short because backward marching around this family amplifies
// smooth perturbations (its tangent diffusivity is negative); see the tests
// for the measured error floors at longer horizons.
struct Benchmark {
    MarketParams market{0.35, 0.1, 0.0};
    ClosedFormParams params = ClosedFormParams::explicit_family(0.5, 0.0, 0.0, 0.35);
    double s_min = 0.1, s_max = 2.0, maturity = 0.1;
    double newton_tol = 1e-7;  // near-singular layer Jacobians cap the certificate

    GridSpec grid(std::size_t n_space, std::size_t n_time) const {
        return GridSpec{s_min, s_max, n_space, n_time, maturity};
    }
    Payoff snapshot() const { return ClosedFormSnapshot{params, market, maturity}; }
    SolverConfig solver() const {
        SolverConfig cfg;
        cfg.newton_tol = newton_tol;
        cfg.boundary_policy = BoundaryPolicy::exact_closed_form;
        return cfg;
    }
};

// Call sweep configuration (the near-strike figure pins the grid).
struct CallSweep {
    double strike = 0.914;
    MarketParams market{0.35, 0.1, 0.0};
    GridSpec grid{0.1, 2.0, 39, 18, 0.9};
    double smoothing = 0.05;  // one time step; kinked calls at rho >= 0.2
                              // violate the depth bound 1/(rho S) near expiry
};

struct SpreadFigure {
    double e_long = 60.0, e_short = 80.0;
    MarketParams market{0.35, 0.0, 0.02};
    GridSpec grid{20.0, 140.0, 61, 20, 1.0};
    double smoothing = 0.05;
};

using Clock = std::chrono::steady_clock;

struct Timer {
    Clock::time_point start = Clock::now();
    double seconds() const {
        return std::chrono::duration<double>(Clock::now() - start).count();
    }
};

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void push_market(CheckReport& r, const MarketParams& p) {
    r.config.emplace_back("sigma", format_double(p.sigma));
    r.config.emplace_back("rho", format_double(p.rho));
    r.config.emplace_back("rate", format_double(p.rate));
}

void push_grid(CheckReport& r, const GridSpec& g) {
    r.config.emplace_back("s_min", format_double(g.s_min));
    r.config.emplace_back("s_max", format_double(g.s_max));
    r.config.emplace_back("n_space", std::to_string(g.n_space));
    r.config.emplace_back("n_time", std::to_string(g.n_time));
    r.config.emplace_back("maturity", format_double(g.maturity));
}

double sup_rel_error(const std::vector<double>& got, const std::vector<double>& exact) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i) {
        num = std::max(num, std::abs(got[i] - exact[i]));
        den = std::max(den, std::abs(exact[i]));
    }
    return num / den;
}

double min_margin(const std::vector<double>& hi, const std::vector<double>& lo) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < hi.size(); ++i) m = std::min(m, hi[i] - lo[i]);
    return m;
}

double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

double CheckReport::metric(const std::string& key) const {
    for (const auto& [k, v] : metrics)
        if (k == key) return v;
    throw std::invalid_argument("no metric named " + key);
}

CheckReport check_benchmark_accuracy() {
    Timer timer;
    const Benchmark bench;
    CheckReport report;
    report.name = "benchmark-accuracy";
    push_market(report, bench.market);
    report.config.emplace_back("m", format_double(bench.params.m));
    report.config.emplace_back("s_min", format_double(bench.s_min));
    report.config.emplace_back("s_max", format_double(bench.s_max));
    report.config.emplace_back("maturity", format_double(bench.maturity));
    report.config.emplace_back("newton_tol", format_double(bench.newton_tol));
    report.config.emplace_back("boundary", "exact-closed-form");

    const std::size_t nodes[] = {16, 28, 42};
    const std::size_t layers[] = {15, 30};
    bool all_within = true;
    double finest = 0.0;
    for (std::size_t ns : nodes) {
        for (std::size_t nt : layers) {
            const GridSpec grid = bench.grid(ns, nt);
            const SolutionField field =
                implicit_solve_backward(bench.snapshot(), grid, bench.market, bench.solver());
            std::vector<double> exact(grid.n_space);
            for (std::size_t i = 0; i < grid.n_space; ++i)
                exact[i] = invariant_u(grid.node(i), 0.0, bench.params, bench.market);
            const double err = sup_rel_error(field.layer(0), exact);
            report.metrics.emplace_back(
                "rel_err_" + std::to_string(ns) + "x" + std::to_string(nt), err);
            all_within = all_within && err <= 5e-3;
            if (ns == 42 && nt == 30) finest = err;
        }
    }
    report.metrics.emplace_back("finest_rel_err", finest);
    report.status = (all_within && finest <= 2e-3) ? CheckStatus::pass : CheckStatus::fail;
    report.runtime_seconds = timer.seconds();
    return report;
}

CheckReport check_rho_monotonicity() {
    Timer timer;
    const CallSweep sweep;
    CheckReport report;
    report.name = "rho-monotonicity";
    push_market(report, sweep.market);
    push_grid(report, sweep.grid);
    report.config.emplace_back("strike", format_double(sweep.strike));
    report.config.emplace_back("terminal_smoothing", format_double(sweep.smoothing));
    report.config.emplace_back("rho_sweep", "0.1,0.2,0.3");

    SolverConfig cfg;
    cfg.terminal_smoothing = sweep.smoothing;
    const Payoff payoff = Call{sweep.strike, 1.0};
    std::vector<std::vector<double>> slices;
    for (double rho : {0.1, 0.2, 0.3}) {
        MarketParams p = sweep.market;
        p.rho = rho;
        slices.push_back(implicit_solve_backward(payoff, sweep.grid, p, cfg).layer(0));
    }
    const double tol = 10.0 * cfg.newton_tol;
    const double m01 = min_margin(slices[1], slices[0]);
    const double m12 = min_margin(slices[2], slices[1]);
    report.metrics.emplace_back("min_margin_rho01_02", m01);
    report.metrics.emplace_back("min_margin_rho02_03", m12);
    report.metrics.emplace_back("tolerance", tol);
    report.status = (m01 >= -tol && m12 >= -tol) ? CheckStatus::pass : CheckStatus::fail;
    report.runtime_seconds = timer.seconds();
    return report;
}

CheckReport check_nonlinearity_gap() {
    Timer timer;
    const CallSweep sweep;
    CheckReport report;
    report.name = "nonlinearity-gap";
    MarketParams p = sweep.market;
    p.rho = 0.03;
    push_market(report, p);
    push_grid(report, sweep.grid);
    report.config.emplace_back("strike", format_double(sweep.strike));
    report.config.emplace_back("quantities", "3,5,8");

    SolverConfig cfg;  // raw kinked payoffs converge at rho = 0.03
    std::vector<std::vector<double>> u;
    for (double k : {3.0, 5.0, 8.0})
        u.push_back(
            implicit_solve_backward(Payoff{Call{sweep.strike, k}}, sweep.grid, p, cfg).layer(0));

    double max_gap = 0.0, arg_s = 0.0;
    for (std::size_t i = 0; i < u[0].size(); ++i) {
        const double gap = std::abs(u[2][i] - (u[0][i] + u[1][i]));
        if (gap > max_gap) {
            max_gap = gap;
            arg_s = sweep.grid.node(i);
        }
    }
    const double gap_left = std::abs(u[2].front() - (u[0].front() + u[1].front()));
    const double gap_right = std::abs(u[2].back() - (u[0].back() + u[1].back()));

    // the same decomposition under the linear model cancels by superposition
    MarketParams lin = p;
    lin.rate = 0.0;
    std::vector<std::vector<double>> v;
    for (double k : {3.0, 5.0, 8.0})
        v.push_back(linear_fd_solve(Payoff{Call{sweep.strike, k}}, sweep.grid, lin).layer(0));
    double linear_gap = 0.0;
    for (std::size_t i = 0; i < v[0].size(); ++i)
        linear_gap = std::max(linear_gap, std::abs(v[2][i] - (v[0][i] + v[1][i])));

    const double tol = 10.0 * cfg.newton_tol;
    const double window = 10.0 * sweep.grid.h();
    report.metrics.emplace_back("max_gap", max_gap);
    report.metrics.emplace_back("argmax_s", arg_s);
    report.metrics.emplace_back("strike_window", window);
    report.metrics.emplace_back("gap_at_s_min", gap_left);
    report.metrics.emplace_back("gap_at_s_max", gap_right);
    report.metrics.emplace_back("linear_max_gap", linear_gap);
    report.metrics.emplace_back("tolerance", tol);
    const bool ok = max_gap > tol && std::abs(arg_s - sweep.strike) <= window &&
                    linear_gap <= 1e-10;
    report.status = ok ? CheckStatus::pass : CheckStatus::fail;
    report.runtime_seconds = timer.seconds();
    return report;
}

CheckReport check_guess_independence() {
    Timer timer;
    const CallSweep sweep;
    CheckReport report;
    report.name = "guess-independence";
    push_market(report, sweep.market);
    push_grid(report, sweep.grid);
    report.config.emplace_back("strike", format_double(sweep.strike));
    report.config.emplace_back("guess_constants", "0.03,1.0");

    const Payoff payoff = Call{sweep.strike, 1.0};
    SolverConfig cfg;
    cfg.initial_guess = InitialGuess::constant;
    cfg.guess_constant = 0.03;
    const auto small_k =
        implicit_solve_backward(payoff, sweep.grid, sweep.market, cfg).values;
    cfg.guess_constant = 1.0;
    const auto large_k =
        implicit_solve_backward(payoff, sweep.grid, sweep.market, cfg).values;
    cfg.initial_guess = InitialGuess::warm_start;
    const auto warm = implicit_solve_backward(payoff, sweep.grid, sweep.market, cfg).values;

    const double tol = 10.0 * cfg.newton_tol;
    const double d_kk = sup_diff(small_k, large_k);
    const double d_kw = sup_diff(small_k, warm);
    report.metrics.emplace_back("sup_diff_k003_k1", d_kk);
    report.metrics.emplace_back("sup_diff_k003_warm", d_kw);
    report.metrics.emplace_back("tolerance", tol);
    report.status = (d_kk <= tol && d_kw <= tol) ? CheckStatus::pass : CheckStatus::fail;
    report.runtime_seconds = timer.seconds();
    return report;
}

CheckReport check_explicit_divergence() {
    Timer timer;
    const Benchmark bench;
    CheckReport report;
    report.name = "explicit-divergence";
    push_market(report, bench.market);
    report.config.emplace_back("m", format_double(bench.params.m));
    report.config.emplace_back("s_min", format_double(bench.s_min));
    report.config.emplace_back("s_max", format_double(bench.s_max));
    report.config.emplace_back("maturity", format_double(bench.maturity));
    report.config.emplace_back("mesh_ratios", "0.1,1,10");
    report.config.emplace_back("n_time", "60");

    bool all_diverged = true;
    int idx = 0;
    for (double ratio : {0.1, 1.0, 10.0}) {
        const std::size_t n_time = 60;
        const double h = std::sqrt(bench.maturity / (ratio * static_cast<double>(n_time)));
        const std::size_t n_space =
            std::max<std::size_t>(12, static_cast<std::size_t>(
                                          std::lround((bench.s_max - bench.s_min) / h)) + 1);
        const GridSpec grid = bench.grid(n_space, n_time);
        SolverConfig cfg = bench.solver();
        const SolutionField field =
            explicit_solve_backward(bench.snapshot(), grid, bench.market, cfg);

        double peak = 0.0, terminal_scale = 0.0, err = 0.0, exact_scale = 0.0;
        for (std::size_t i = 0; i < grid.n_space; ++i) {
            terminal_scale = std::max(terminal_scale, std::abs(field.at(grid.n_time, i)));
            const double exact = invariant_u(grid.node(i), 0.0, bench.params, bench.market);
            exact_scale = std::max(exact_scale, std::abs(exact));
            err = std::max(err, std::abs(field.at(0, i) - exact));
        }
        for (double v : field.values)
            if (std::isfinite(v)) peak = std::max(peak, std::abs(v));

        const std::string tag = "ratio" + std::to_string(idx++);
        report.metrics.emplace_back(tag + "_mesh_ratio", ratio);
        report.metrics.emplace_back(tag + "_diverged", field.diverged ? 1.0 : 0.0);
        report.metrics.emplace_back(tag + "_peak_over_terminal", peak / terminal_scale);
        report.metrics.emplace_back(tag + "_final_rel_err", err / exact_scale);
        all_diverged = all_diverged && field.diverged;
    }
    // The predicate is the specified one; with this equation the nonlinear
    // feedback bounds explicit oscillations near the data scale, so the
    // blow-up flag does not trigger and the check reports the failure with
    // the measured evidence (the explicit fields are still useless: compare
    // the final errors against benchmark-accuracy).
    report.status = all_diverged ? CheckStatus::pass : CheckStatus::fail;
    report.runtime_seconds = timer.seconds();
    return report;
}

CheckReport check_spread_figure() {
    Timer timer;
    const SpreadFigure fig;
    CheckReport report;
    report.name = "spread-figure";
    push_market(report, fig.market);
    push_grid(report, fig.grid);
    report.config.emplace_back("e_long", format_double(fig.e_long));
    report.config.emplace_back("e_short", format_double(fig.e_short));
    report.config.emplace_back("terminal_smoothing", format_double(fig.smoothing));
    report.config.emplace_back("rho_sweep", "0.05,0.1,0.2");

    const Payoff payoff = BullSpread{fig.e_long, fig.e_short};
    SolverConfig cfg;
    cfg.terminal_smoothing = fig.smoothing;
    std::vector<std::vector<double>> slices;
    for (double rho : {0.05, 0.1, 0.2}) {
        MarketParams p = fig.market;
        p.rho = rho;
        slices.push_back(implicit_solve_backward(payoff, fig.grid, p, cfg).layer(0));
    }
    const auto linear = linear_fd_solve(payoff, fig.grid, fig.market, cfg).layer(0);

    const double tol = 10.0 * cfg.newton_tol;
    const double m01 = min_margin(slices[1], slices[0]);
    const double m12 = min_margin(slices[2], slices[1]);

    // nonlinear curves dominate the linear one between the strikes
    double near_strike_margin = std::numeric_limits<double>::infinity();
    double lin_err = 0.0;
    for (std::size_t i = 0; i < linear.size(); ++i) {
        const double S = fig.grid.node(i);
        if (S >= 40.0 && S <= 100.0)
            near_strike_margin = std::min(near_strike_margin, slices[0][i] - linear[i]);
        const double exact = linear_bs_price(payoff, S, 0.0, fig.market, fig.grid.maturity);
        lin_err = std::max(lin_err, std::abs(linear[i] - exact) / std::max(std::abs(exact), 1.0));
    }
    const auto payoff_check = [&] {  // terminal layer reproduces the raw payoff off-kink
        const SolutionField f = linear_fd_solve(payoff, fig.grid, fig.market, SolverConfig{});
        double err = 0.0;
        for (std::size_t i = 0; i < fig.grid.n_space; ++i)
            err = std::max(err, std::abs(f.at(fig.grid.n_time, i) -
                                         payoff_value(payoff, fig.grid.node(i))));
        return err;
    };

    report.metrics.emplace_back("min_margin_rho005_01", m01);
    report.metrics.emplace_back("min_margin_rho01_02", m12);
    report.metrics.emplace_back("near_strike_nonlinear_minus_linear", near_strike_margin);
    report.metrics.emplace_back("linear_fd_vs_closed_form_rel", lin_err);
    report.metrics.emplace_back("terminal_payoff_error", payoff_check());
    report.metrics.emplace_back("tolerance", tol);
    const bool ok = m01 >= -tol && m12 >= -tol && near_strike_margin > 0.0;
    report.status = ok ? CheckStatus::pass : CheckStatus::fail;
    report.runtime_seconds = timer.seconds();
    return report;
}

std::vector<std::string> check_names() {
    return {"benchmark-accuracy", "rho-monotonicity",    "nonlinearity-gap",
            "guess-independence", "explicit-divergence", "spread-figure"};
}

std::vector<CheckReport> run_all(std::span<const std::string> selection) {
    const auto names = check_names();
    std::vector<bool> selected(names.size(), false);
    for (const auto& want : selection) {
        const auto it = std::find(names.begin(), names.end(), want);
        if (it == names.end()) throw std::invalid_argument("unknown check: " + want);
        selected[static_cast<std::size_t>(it - names.begin())] = true;
    }
    std::vector<CheckReport> reports;
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (!selected[i]) continue;
        switch (i) {
            case 0: reports.push_back(check_benchmark_accuracy()); break;
            case 1: reports.push_back(check_rho_monotonicity()); break;
            case 2: reports.push_back(check_nonlinearity_gap()); break;
            case 3: reports.push_back(check_guess_independence()); break;
            case 4: reports.push_back(check_explicit_divergence()); break;
            case 5: reports.push_back(check_spread_figure()); break;
        }
    }
    return reports;
}

void write_report(std::ostream& out, std::span<const CheckReport> reports) {
    for (const auto& r : reports) {
        out << "check=" << r.name << " status=";
        switch (r.status) {
            case CheckStatus::pass: out << "pass"; break;
            case CheckStatus::fail: out << "fail"; break;
            case CheckStatus::info: out << "info"; break;
        }
        out << " runtime_seconds=" << format_double(r.runtime_seconds);
        for (const auto& [k, v] : r.metrics) out << ' ' << k << '=' << format_double(v);
        for (const auto& [k, v] : r.config) out << " cfg." << k << '=' << v;
        out << '\n';
    }
}

void write_report_file(const std::string& path, std::span<const CheckReport> reports) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open report file: " + path);
    write_report(out, reports);
}

}  // namespace nlbs::validation
