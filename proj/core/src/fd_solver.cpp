#include "nlbs/fd_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "nlbs/closed_form.hpp"
#include "nlbs/model.hpp"
#include "nlbs/newton.hpp"

namespace nlbs {
namespace {

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double bs_vanilla_call(double S, double strike, double r, double sigma, double ttm) {
    if (ttm <= 0.0) return std::max(S - strike, 0.0);
    const double discounted = strike * std::exp(-r * ttm);
    if (S <= 0.0) return 0.0;
    if (sigma <= 0.0) return std::max(S - discounted, 0.0);
    const double vol = sigma * std::sqrt(ttm);
    const double d1 = (std::log(S / strike) + (r + 0.5 * sigma * sigma) * ttm) / vol;
    const double d2 = d1 - vol;
    return S * norm_cdf(d1) - discounted * norm_cdf(d2);
}

double bs_vanilla_put(double S, double strike, double r, double sigma, double ttm) {
    // put-call parity keeps the sigma -> 0 and S -> 0 limits consistent
    return bs_vanilla_call(S, strike, r, sigma, ttm) - S + strike * std::exp(-r * ttm);
}

// Terminal samples on the grid nodes, optionally replacing a kinked payoff by
// its linear Black-Scholes value a short time before expiry.
std::vector<double> sample_terminal(const Payoff& payoff, const GridSpec& grid,
                                    const MarketParams& p, double smoothing) {
    std::vector<double> v(grid.n_space);
    const bool smooth = smoothing > 0.0 && !std::holds_alternative<ClosedFormSnapshot>(payoff);
    for (std::size_t i = 0; i < grid.n_space; ++i) {
        const double S = grid.node(i);
        v[i] = smooth ? linear_bs_price(payoff, S, grid.maturity - smoothing, p, grid.maturity)
                      : payoff_value(payoff, S);
    }
    return v;
}

// Boundary values at layer time t under the configured policy.
struct BoundaryModel {
    std::function<double(double S, double t)> value;
};

BoundaryModel make_boundaries(const Payoff& payoff, const std::vector<double>& terminal,
                              const GridSpec& grid, const MarketParams& p,
                              const SolverConfig& cfg) {
    switch (cfg.boundary_policy) {
        case BoundaryPolicy::exact_closed_form: {
            const auto* snap = std::get_if<ClosedFormSnapshot>(&payoff);
            if (!snap)
                throw std::domain_error(
                    "exact-closed-form boundaries require a closed-form snapshot terminal");
            const double offset = snap->at_time - grid.maturity;
            const ClosedFormParams params = snap->params;
            const MarketParams market = snap->market;
            return {[params, market, offset](double S, double t) {
                return invariant_u(S, t + offset, params, market);
            }};
        }
        case BoundaryPolicy::payoff_held: {
            const double left = terminal.front();
            const double right = terminal.back();
            const double s_min = grid.s_min;
            return {[left, right, s_min](double S, double) {
                return S == s_min ? left : right;
            }};
        }
        case BoundaryPolicy::linear_bs: {
            const Payoff pay = payoff;
            const MarketParams market = p;
            const double T = grid.maturity;
            return {[pay, market, T](double S, double t) {
                return linear_bs_price(pay, S, t, market, T);
            }};
        }
    }
    throw std::logic_error("unreachable boundary policy");
}

// Unscaled residual of one implicit layer; same roots as the difference
// system but with poles (not flat double roots) at the degenerate surface,
// which keeps damped Newton away from it.
struct LayerSystem {
    std::vector<double> s_int;    // interior node prices
    std::vector<double> u_next;   // known layer, interior values
    double lb = 0.0, rb = 0.0;    // boundary values of the unknown layer
    double h = 0.0, tau = 0.0;
    MarketParams p;

    std::vector<double> second_differences(const std::vector<double>& x) const {
        const std::size_t n = x.size();
        std::vector<double> d(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double um = i == 0 ? lb : x[i - 1];
            const double up = i + 1 == n ? rb : x[i + 1];
            d[i] = um - 2.0 * x[i] + up;
        }
        return d;
    }

    std::vector<double> raw_residual(const std::vector<double>& x) const {
        const std::size_t n = x.size();
        std::vector<double> r(n);
        const auto d2 = second_differences(x);
        const double h2 = h * h;
        for (std::size_t i = 0; i < n; ++i) {
            const double den = 1.0 - p.rho * s_int[i] * d2[i] / h2;
            const double diffusion =
                0.5 * p.sigma * p.sigma * s_int[i] * s_int[i] * (d2[i] / h2) / (den * den);
            r[i] = (u_next[i] - x[i]) / tau + diffusion;
        }
        return r;
    }

    TriDiagonal raw_jacobian(const std::vector<double>& x) const {
        const std::size_t n = x.size();
        TriDiagonal J(n);
        const auto d2 = second_differences(x);
        const double h2 = h * h;
        for (std::size_t i = 0; i < n; ++i) {
            const double a = p.rho * s_int[i] / h2;
            const double den = 1.0 - a * d2[i];
            const double c = 0.5 * p.sigma * p.sigma * s_int[i] * s_int[i] / h2;
            const double dphi = (1.0 + a * d2[i]) / (den * den * den);
            if (i > 0) J.sub[i] = c * dphi;
            if (i + 1 < n) J.sup[i] = c * dphi;
            J.diag[i] = -1.0 / tau - 2.0 * c * dphi;
        }
        return J;
    }

    // max-norm of the difference system (the convergence certificate)
    double system_norm(const std::vector<double>& x) const {
        const auto d2 = second_differences(x);
        const double h2 = h * h;
        double norm = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double g = h2 / s_int[i] - p.rho * d2[i];
            const double r = 0.25 * (u_next[i] - x[i]) * g * g +
                             tau * p.sigma * p.sigma * h2 / 8.0 * d2[i];
            norm = std::max(norm, std::abs(r));
        }
        return norm;
    }

    double min_abs_denominator(const std::vector<double>& x) const {
        const auto d2 = second_differences(x);
        const double h2 = h * h;
        double m = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < x.size(); ++i)
            m = std::min(m, std::abs(1.0 - p.rho * s_int[i] * d2[i] / h2));
        return m;
    }
};

// physical layer roots keep well clear of the degenerate surface; candidates
// closer than this are pole-adjacent artefacts of the cubic system
constexpr double k_pole_floor = 1e-6;

NewtonResult solve_layer(const LayerSystem& sys, const std::vector<double>& guess,
                         const SolverConfig& cfg) {
    const NewtonOptions opts{cfg.newton_tol, cfg.newton_max_iter, cfg.damping_max_halvings};
    const ResidualFn residual = [&sys](const std::vector<double>& x) {
        return sys.raw_residual(x);
    };
    const auto certificate = [&sys](const std::vector<double>& x, double) {
        return sys.system_norm(x);
    };
    if (cfg.fd_jacobian) {
        // cross-check mode runs on the dense finite-difference Jacobian
        const DenseJacobianFn jac = [&residual](const std::vector<double>& x) {
            return fd_jacobian(residual, x);
        };
        NewtonResult res = newton_iterate(residual, jac, guess, opts);
        res.residual_norm = sys.system_norm(res.x);
        res.converged = res.residual_norm <= opts.tol;
        return res;
    }
    const TriJacobianFn jac = [&sys](const std::vector<double>& x) {
        return sys.raw_jacobian(x);
    };
    NewtonResult res = newton_iterate_certified(residual, jac, guess, opts, certificate);
    res.residual_norm = sys.system_norm(res.x);
    return res;
}

SolutionField march_implicit(const std::vector<double>& terminal, const BoundaryModel& bounds,
                             const GridSpec& grid, const MarketParams& p,
                             const SolverConfig& cfg) {
    SolutionField field(grid, Scheme::fully_implicit);
    const std::size_t n = grid.n_interior();
    std::copy(terminal.begin(), terminal.end(),
              field.values.begin() + static_cast<std::ptrdiff_t>(grid.n_time * grid.n_space));

    LayerSystem sys;
    sys.h = grid.h();
    sys.tau = grid.tau();
    sys.p = p;
    sys.s_int.resize(n);
    for (std::size_t i = 0; i < n; ++i) sys.s_int[i] = grid.node(i + 1);

    for (std::size_t j = grid.n_time; j-- > 0;) {
        const double t = grid.time(j);
        sys.lb = bounds.value(grid.s_min, t);
        sys.rb = bounds.value(grid.s_max, t);
        sys.u_next.assign(field.values.begin() + static_cast<std::ptrdiff_t>((j + 1) * grid.n_space) + 1,
                          field.values.begin() + static_cast<std::ptrdiff_t>((j + 2) * grid.n_space) - 1);

        // The cubic layer system can carry spurious roots near the degenerate
        // surface, and which root an iteration reaches depends on its start.
        // To keep fields independent of the configured guess, both starts are
        // solved; on disagreement the root continuously connected to the
        // known layer (the smaller time jump) is the scheme solution.
        NewtonResult from_flat =
            solve_layer(sys, std::vector<double>(n, cfg.guess_constant), cfg);
        NewtonResult from_warm = solve_layer(sys, sys.u_next, cfg);
        const int total_iterations = from_flat.iterations + from_warm.iterations;

        const auto healthy = [&](const NewtonResult& r) {
            return r.converged && sys.min_abs_denominator(r.x) > k_pole_floor;
        };
        const auto jump = [&](const NewtonResult& r) {
            double m = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                m = std::max(m, std::abs(r.x[i] - sys.u_next[i]));
            return m;
        };

        const bool flat_ok = healthy(from_flat);
        const bool warm_ok = healthy(from_warm);
        NewtonResult res;
        if (flat_ok && warm_ok) {
            double disagreement = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                disagreement =
                    std::max(disagreement, std::abs(from_flat.x[i] - from_warm.x[i]));
            if (disagreement <= 10.0 * cfg.newton_tol)
                res = cfg.initial_guess == InitialGuess::warm_start ? std::move(from_warm)
                                                                    : std::move(from_flat);
            else
                res = jump(from_warm) < jump(from_flat) ? std::move(from_warm)
                                                        : std::move(from_flat);
        } else if (flat_ok || warm_ok) {
            res = flat_ok ? std::move(from_flat) : std::move(from_warm);
        } else {
            const double den = std::min(sys.min_abs_denominator(from_flat.x),
                                        sys.min_abs_denominator(from_warm.x));
            if (den <= k_pole_floor) throw SingularDenominator(den);
            throw NoConvergence(total_iterations,
                                std::min(from_flat.residual_norm, from_warm.residual_norm),
                                static_cast<int>(j));
        }

        field.at(j, 0) = sys.lb;
        field.at(j, grid.n_space - 1) = sys.rb;
        for (std::size_t i = 0; i < n; ++i) field.at(j, i + 1) = res.x[i];
        field.diagnostics.newton_iterations.push_back(total_iterations);
        field.diagnostics.residual_norms.push_back(res.residual_norm);
    }
    return field;
}

SolutionField march_explicit(const std::vector<double>& terminal, const BoundaryModel& bounds,
                             const GridSpec& grid, const MarketParams& p) {
    SolutionField field(grid, Scheme::forward_explicit);
    const std::size_t n = grid.n_interior();
    std::copy(terminal.begin(), terminal.end(),
              field.values.begin() + static_cast<std::ptrdiff_t>(grid.n_time * grid.n_space));

    double scale = 0.0;
    for (double v : terminal) scale = std::max(scale, std::abs(v));
    const double cap = k_divergence_factor * scale;
    const double h2 = grid.h() * grid.h();
    const double tau = grid.tau();

    for (std::size_t j = grid.n_time; j-- > 0;) {
        const double t = grid.time(j);
        field.at(j, 0) = bounds.value(grid.s_min, t);
        field.at(j, grid.n_space - 1) = bounds.value(grid.s_max, t);
        for (std::size_t i = 1; i <= n; ++i) {
            const double S = grid.node(i);
            const double d2 = field.at(j + 1, i - 1) - 2.0 * field.at(j + 1, i) +
                              field.at(j + 1, i + 1);
            const double den = 1.0 - p.rho * S * d2 / h2;
            const double update =
                tau * 0.5 * p.sigma * p.sigma * S * S * (d2 / h2) / (den * den);
            field.at(j, i) = field.at(j + 1, i) + update;
        }
        for (std::size_t i = 0; i < grid.n_space; ++i) {
            const double v = field.at(j, i);
            if (!std::isfinite(v) || std::abs(v) > cap) {
                field.diverged = true;
                field.diagnostics.diverged_layer = static_cast<int>(j);
                return field;
            }
        }
    }
    return field;
}

}  // namespace

std::vector<double> assemble_layer_residual(std::span<const double> u_next,
                                            std::span<const double> u_guess,
                                            std::pair<double, double> boundaries,
                                            const GridSpec& grid, const MarketParams& p) {
    const std::size_t n = grid.n_interior();
    if (u_next.size() != n || u_guess.size() != n)
        throw std::invalid_argument("assemble_layer_residual: size mismatch with grid interior");
    const double h2 = grid.h() * grid.h();
    const double tau = grid.tau();
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double S = grid.node(i + 1);
        const double um = i == 0 ? boundaries.first : u_guess[i - 1];
        const double up = i + 1 == n ? boundaries.second : u_guess[i + 1];
        const double d2 = um - 2.0 * u_guess[i] + up;
        const double g = h2 / S - p.rho * d2;
        r[i] = 0.25 * (u_next[i] - u_guess[i]) * g * g +
               tau * p.sigma * p.sigma * h2 / 8.0 * d2;
    }
    return r;
}

SolutionField implicit_solve_backward(const Payoff& terminal, const GridSpec& grid,
                                      const MarketParams& p, const SolverConfig& cfg) {
    grid.validate();
    p.validate(/*nonlinear=*/true);
    validate_payoff(terminal);
    const auto samples = sample_terminal(terminal, grid, p, cfg.terminal_smoothing);
    return march_implicit(samples, make_boundaries(terminal, samples, grid, p, cfg), grid, p,
                          cfg);
}

SolutionField implicit_solve_backward(const std::vector<double>& terminal, const GridSpec& grid,
                                      const MarketParams& p, const SolverConfig& cfg) {
    grid.validate();
    p.validate(/*nonlinear=*/true);
    if (terminal.size() != grid.n_space)
        throw std::invalid_argument("terminal data size must match grid.n_space");
    if (cfg.boundary_policy != BoundaryPolicy::payoff_held)
        throw std::domain_error("raw terminal data supports only the payoff-held boundary");
    BoundaryModel bounds{[left = terminal.front(), right = terminal.back(),
                          s_min = grid.s_min](double S, double) {
        return S == s_min ? left : right;
    }};
    return march_implicit(terminal, bounds, grid, p, cfg);
}

SolutionField explicit_solve_backward(const Payoff& terminal, const GridSpec& grid,
                                      const MarketParams& p, const SolverConfig& cfg) {
    grid.validate();
    p.validate(/*nonlinear=*/true);
    validate_payoff(terminal);
    const auto samples = sample_terminal(terminal, grid, p, cfg.terminal_smoothing);
    return march_explicit(samples, make_boundaries(terminal, samples, grid, p, cfg), grid, p);
}

SolutionField explicit_solve_backward(const std::vector<double>& terminal, const GridSpec& grid,
                                      const MarketParams& p, const SolverConfig& cfg) {
    grid.validate();
    p.validate(/*nonlinear=*/true);
    if (terminal.size() != grid.n_space)
        throw std::invalid_argument("terminal data size must match grid.n_space");
    if (cfg.boundary_policy != BoundaryPolicy::payoff_held)
        throw std::domain_error("raw terminal data supports only the payoff-held boundary");
    BoundaryModel bounds{[left = terminal.front(), right = terminal.back(),
                          s_min = grid.s_min](double S, double) {
        return S == s_min ? left : right;
    }};
    return march_explicit(terminal, bounds, grid, p);
}

double linear_bs_price(const Payoff& payoff, double S, double t, const MarketParams& p,
                       double maturity) {
    if (S < 0.0) throw std::domain_error("linear_bs_price: S must be >= 0");
    if (t > maturity) throw std::domain_error("linear_bs_price: t must not exceed maturity");
    const double ttm = maturity - t;
    struct Visitor {
        double S, r, sigma, ttm;
        double operator()(const Call& c) const {
            return c.quantity * bs_vanilla_call(S, c.strike, r, sigma, ttm);
        }
        double operator()(const Strangle& st) const {
            return st.k_put * bs_vanilla_put(S, st.e_put, r, sigma, ttm) +
                   st.k_call * bs_vanilla_call(S, st.e_call, r, sigma, ttm);
        }
        double operator()(const BullSpread& b) const {
            return bs_vanilla_call(S, b.e_long, r, sigma, ttm) -
                   bs_vanilla_call(S, b.e_short, r, sigma, ttm);
        }
        double operator()(const ClosedFormSnapshot&) const {
            throw std::domain_error("closed-form snapshots have no linear price");
        }
    };
    return std::visit(Visitor{S, p.rate, p.sigma, ttm}, payoff);
}

SolutionField linear_fd_solve(const Payoff& payoff, const GridSpec& grid, const MarketParams& p,
                              const SolverConfig& cfg) {
    grid.validate();
    p.validate(/*nonlinear=*/false);
    validate_payoff(payoff);
    if (std::holds_alternative<ClosedFormSnapshot>(payoff))
        throw std::domain_error("linear_fd_solve: closed-form snapshots are not priceable");

    SolutionField field(grid, Scheme::linear_fd);
    const std::size_t n = grid.n_interior();
    const double h = grid.h();
    const double tau = grid.tau();
    const auto terminal = sample_terminal(payoff, grid, p, cfg.terminal_smoothing);
    std::copy(terminal.begin(), terminal.end(),
              field.values.begin() + static_cast<std::ptrdiff_t>(grid.n_time * grid.n_space));

    SolverConfig bcfg = cfg;
    if (bcfg.boundary_policy == BoundaryPolicy::exact_closed_form)
        throw std::domain_error("linear_fd_solve: exact-closed-form boundaries unsupported");
    const BoundaryModel bounds = make_boundaries(payoff, terminal, grid, p, bcfg);

    std::vector<double> s_int(n);
    for (std::size_t i = 0; i < n; ++i) s_int[i] = grid.node(i + 1);

    const NewtonOptions opts{cfg.newton_tol, cfg.newton_max_iter, cfg.damping_max_halvings};
    for (std::size_t j = grid.n_time; j-- > 0;) {
        const double t = grid.time(j);
        const double lb = bounds.value(grid.s_min, t);
        const double rb = bounds.value(grid.s_max, t);
        std::vector<double> u_next(
            field.values.begin() + static_cast<std::ptrdiff_t>((j + 1) * grid.n_space) + 1,
            field.values.begin() + static_cast<std::ptrdiff_t>((j + 2) * grid.n_space) - 1);

        const ResidualFn residual = [&](const std::vector<double>& x) {
            std::vector<double> r(n);
            for (std::size_t i = 0; i < n; ++i) {
                const double um = i == 0 ? lb : x[i - 1];
                const double up = i + 1 == n ? rb : x[i + 1];
                const double d2 = um - 2.0 * x[i] + up;
                const double ds = up - um;
                r[i] = (u_next[i] - x[i]) / tau +
                       0.5 * p.sigma * p.sigma * s_int[i] * s_int[i] * d2 / (h * h) +
                       p.rate * s_int[i] * ds / (2.0 * h) - p.rate * x[i];
            }
            return r;
        };
        const TriJacobianFn jacobian = [&](const std::vector<double>&) {
            TriDiagonal J(n);
            for (std::size_t i = 0; i < n; ++i) {
                const double diff = 0.5 * p.sigma * p.sigma * s_int[i] * s_int[i] / (h * h);
                const double adv = p.rate * s_int[i] / (2.0 * h);
                if (i > 0) J.sub[i] = diff - adv;
                if (i + 1 < n) J.sup[i] = diff + adv;
                J.diag[i] = -1.0 / tau - 2.0 * diff - p.rate;
            }
            return J;
        };
        NewtonResult res = newton_iterate(residual, jacobian, u_next, opts);
        if (!res.converged)
            throw NoConvergence(res.iterations, res.residual_norm, static_cast<int>(j));

        field.at(j, 0) = lb;
        field.at(j, grid.n_space - 1) = rb;
        for (std::size_t i = 0; i < n; ++i) field.at(j, i + 1) = res.x[i];
        field.diagnostics.newton_iterations.push_back(res.iterations);
        field.diagnostics.residual_norms.push_back(res.residual_norm);
    }
    return field;
}

}  // namespace nlbs
