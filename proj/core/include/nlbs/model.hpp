#pragma once

#include <functional>

#include "nlbs/types.hpp"

namespace nlbs {

/// Relative floor under which |1 - rho*S*u_SS| is treated as singular.
inline constexpr double k_singular_floor = 1e-10;

/// Residual of the illiquidity equation at one jet point:
///   u_t + (sigma^2 S^2 / 2) * u_SS / (1 - rho S u_SS)^2.
/// The equation does not involve u itself; the value is accepted to keep the
/// full second-order jet in the signature.
/// Throws SingularDenominator when |1 - rho S u_SS| < k_singular_floor.
double pde_residual(double u, double u_t, double u_ss, double S, const MarketParams& p);

/// Terminal payoff value at price S (>= 0). Piecewise linear for option
/// payoffs; the closed-form snapshot evaluates the invariant family.
double payoff_value(const Payoff& payoff, double S);

/// The surface (1/rho) S ln S + S c1(t) + c2(t) on which the PDE denominator
/// vanishes identically. Defined for S > 0, rho != 0.
double degenerate_surface(double S, double t, const std::function<double(double)>& c1,
                          const std::function<double(double)>& c2, double rho);
double degenerate_surface(double S, double t, double c1, double c2, double rho);

/// Maps a solution of the rho-parameterised equation to the rho = 1 form:
/// u solves the equation with parameter rho exactly when rho*u solves the
/// rho = 1 equation.
double rho_rescale(double u, double rho);
SolutionField rho_rescale(const SolutionField& field, double rho);

}  // namespace nlbs
