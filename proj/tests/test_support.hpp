#pragma once

#include <cmath>
#include <functional>
#include <random>

#include "nlbs/closed_form.hpp"
#include "nlbs/model.hpp"

// Shared oracle helpers. These live in test code only and stay independent of
// the library's evaluation paths: derivatives come from fourth-order central
// stencils of the surface under test.
namespace testsup {

using Fn = std::function<double(double)>;

inline double d1_central(const Fn& f, double x, double h) {
    return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h);
}

inline double d2_central(const Fn& f, double x, double h) {
    return (-f(x + 2 * h) + 16 * f(x + h) - 30 * f(x) + 16 * f(x - h) - f(x - 2 * h)) /
           (12 * h * h);
}

// Relative residual of the nonlinear equation at (S, t) for a surface,
// with u_t and u_SS from finite differences.
inline double fd_relative_residual(const nlbs::Surface& u, double S, double t,
                                   const nlbs::MarketParams& p) {
    const double hs = 1e-3 * S;
    const double ht = 1e-3 * std::max(1.0, std::abs(t));
    const double u_t = d1_central([&](double tt) { return u(S, tt); }, t, ht);
    const double u_ss = d2_central([&](double ss) { return u(ss, t); }, S, hs);
    const double val = u(S, t);
    const double res = nlbs::pde_residual(val, u_t, u_ss, S, p);
    const double nonlinear = res - u_t;  // magnitude of the diffusion term
    const double scale = std::max({1.0, std::abs(u_t), std::abs(nonlinear), std::abs(val)});
    return std::abs(res) / scale;
}

// Same residual from the analytic jet of the family; stays accurate where
// finite differences die (near-degenerate members).
inline double jet_relative_residual(double S, double t, const nlbs::ClosedFormParams& params,
                                    const nlbs::MarketParams& p) {
    const nlbs::FamilyJet jet = nlbs::invariant_u_jet(S, t, params, p);
    const double den = 1.0 - p.rho * S * jet.u_ss;
    const double diffusion = 0.5 * p.sigma * p.sigma * S * S * jet.u_ss / (den * den);
    const double scale = std::max({1.0, std::abs(jet.u_t), std::abs(diffusion)});
    return std::abs(jet.u_t + diffusion) / scale;
}

struct Rng {
    std::mt19937 gen{20240615u};
    double uniform(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(gen);
    }
};

}  // namespace testsup
