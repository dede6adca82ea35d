#pragma once

#include <functional>
#include <optional>
#include <utility>

#include "nlbs/types.hpp"

namespace nlbs {

/// A hedge-cost surface as a callable of (S, t).
using Surface = std::function<double(double S, double t)>;

/// A surface family parameterised by volatility, for sensitivity bumps.
using VolSurface = std::function<double(double S, double t, double sigma)>;

// ---------------------------------------------------------------------------
// Scaling reduction
// ---------------------------------------------------------------------------

/// Scaling variable z = ln S - delta*t of the symmetry reduction. S > 0.
double reduce_coords(double S, double t, double delta);

/// The explicit solution y(z) of the reduced first-order equation at
/// delta = sigma^2/8. Even in m; y = -3/rho in the m = 0 limit.
double invariant_y(double z, const ClosedFormParams& params, const MarketParams& p);

/// The invariant solution family u(S, t) at delta = sigma^2/8.
/// Real-root convention: ((x)^4)^{1/3} = |x|^{4/3} and signed real cube roots
/// inside the logarithm, which makes the value even in m and independent of
/// the eps1 sign. Throws DegenerateFamily for m = 0.
double invariant_u(double S, double t, const ClosedFormParams& params, const MarketParams& p);

/// The family as a Surface.
Surface invariant_surface(const ClosedFormParams& params, const MarketParams& p);

/// Value and first/second derivatives of the family member. Closed-form
/// derivatives stay accurate near the degenerate surface (S -> 0, or any S
/// for large |m|), where finite differences of the value lose the residual
/// cancellation.
struct FamilyJet {
    double u = 0.0;
    double u_s = 0.0;
    double u_ss = 0.0;
    double u_t = 0.0;
};

FamilyJet invariant_u_jet(double S, double t, const ClosedFormParams& params,
                          const MarketParams& p);

enum class TrivialVariant {
    linear,           ///< u = c * S
    loglinear_plus,   ///< u = (1 + sqrt(sigma^2/2delta))/rho * (S lnS - delta S t) + c S
    loglinear_minus,  ///< lower sign of the same family
};

/// The trivial (one-parameter) solutions. `c` is the linear coefficient c1
/// for the linear variant and the additive slope d0 for the log-linear ones.
double trivial_u(double S, double t, TrivialVariant variant, double c, const MarketParams& p,
                 double delta);

/// The discriminant-curve solution y = 1/rho, which exists only at
/// delta = sigma^2/8 (within rounding); empty otherwise.
std::optional<double> exceptional_y(double delta, double sigma, double rho);

/// Residual of the reduced second-order equation
///   v_z (1 + rho (v_z + v_zz))^2 - (sigma^2 / 2 delta)(v_z + v_zz).
/// The equation does not involve v itself.
double ode_residual_v(double v, double v_z, double v_zz, const MarketParams& p, double delta);

/// Residual of the first-order equation for y(z):
///   y_z^2 + 2 (y_z/y)(y^2 + y/rho - sigma^2/(4 rho^2 delta))
///         + (y^2 + 2y/rho + (2 delta - sigma^2)/(2 rho^2 delta)).
/// Throws DivisionByZero for y = 0.
double ode_residual_y(double y, double y_z, const MarketParams& p, double delta);

// ---------------------------------------------------------------------------
// Symmetry group
// ---------------------------------------------------------------------------

/// Generator coefficients and group parameter: a1 scales (S, u), a2 shifts t,
/// a3 adds a multiple of S, a4 adds a constant (integrated flow for a1 != 0).
struct GroupElement {
    double a1 = 0.0;
    double a2 = 0.0;
    double a3 = 0.0;
    double a4 = 0.0;
    double epsilon = 0.0;
};

/// The transformed surface: evaluates the original surface at the preimage
/// point and maps the value through the group action. Solutions map to
/// solutions.
Surface apply_group(Surface u, const GroupElement& g);

/// The two functionally independent invariants
///   inv1 = a1 t - a2 ln S,   inv2 = a1 u/S - a3 ln S + a4/S,   S > 0.
std::pair<double, double> group_invariants(double S, double t, double u, const GroupElement& g);

// ---------------------------------------------------------------------------
// Asymptotics and sensitivities
// ---------------------------------------------------------------------------

/// Small-S expansion of the family member, truncated at the S^2 term; the
/// remainder is O(S^{5/2}). Requires m != 0.
double asymptotic_small_s(double S, double t, const ClosedFormParams& params,
                          const MarketParams& p);

/// Large-S expansion, truncated at the S^{-1/2} term; remainder o(S^{-5/4}).
/// The leading 3 S lnS / rho term is shared by every member. Requires m != 0.
double asymptotic_large_s(double S, double t, const ClosedFormParams& params,
                          const MarketParams& p);

struct Greeks {
    double delta = 0.0;  ///< du/dS
    double gamma = 0.0;  ///< d2u/dS2
    double theta = 0.0;  ///< -du/dt
    double vega = 0.0;   ///< du/dsigma
};

struct GreekBumps {
    double relative = 1e-4;
    double floor = 1e-6;
};

/// Central finite-difference sensitivities of a volatility-parameterised
/// surface. The surface must be evaluable at the bumped arguments.
Greeks greeks(const VolSurface& u, double S, double t, const MarketParams& p,
              const GreekBumps& bumps = {});

}  // namespace nlbs
