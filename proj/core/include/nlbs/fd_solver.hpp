#pragma once

#include <span>
#include <utility>
#include <vector>

#include "nlbs/types.hpp"

namespace nlbs {

enum class InitialGuess {
    warm_start,  ///< previous time layer
    constant,    ///< flat field at guess_constant (the reference protocol)
};

enum class BoundaryPolicy {
    exact_closed_form,  ///< invariant family values at s_min/s_max (benchmark mode)
    payoff_held,        ///< terminal payoff values held constant in time
    linear_bs,          ///< linear Black-Scholes values at the boundaries
};

struct SolverConfig {
    Scheme scheme = Scheme::fully_implicit;
    double newton_tol = 1e-12;       ///< max-norm tolerance on the difference system
    int newton_max_iter = 100;
    int damping_max_halvings = 40;
    InitialGuess initial_guess = InitialGuess::warm_start;
    double guess_constant = 0.03;
    BoundaryPolicy boundary_policy = BoundaryPolicy::payoff_held;
    bool fd_jacobian = false;        ///< cross-check mode: finite-difference Jacobian
    double terminal_smoothing = 0.0; ///< >0: replace the payoff by its linear-BS value
                                     ///  this long before expiry (kinked payoffs only)
};

/// One layer of the fully implicit difference system: component i of the
/// returned vector is
///   (u_next_i - u_i)/4 * (h^2/S_i - rho D_i)^2 + tau sigma^2 h^2 / 8 * D_i,
/// with D_i the second difference of the unknown layer and the boundary pair
/// substituted at both ends. Sizes must match grid.n_interior().
std::vector<double> assemble_layer_residual(std::span<const double> u_next,
                                            std::span<const double> u_guess,
                                            std::pair<double, double> boundaries,
                                            const GridSpec& grid, const MarketParams& p);

/// Marches the fully implicit scheme backward from terminal data, one damped
/// Newton solve per layer. The terminal condition is the payoff sampled on
/// the grid nodes (optionally smoothed per cfg.terminal_smoothing).
/// Throws NoConvergence (with the layer attached) and SingularDenominator.
SolutionField implicit_solve_backward(const Payoff& terminal, const GridSpec& grid,
                                      const MarketParams& p, const SolverConfig& cfg = {});

/// Same scheme from explicit terminal values; exact_closed_form boundaries
/// are not available in this overload.
SolutionField implicit_solve_backward(const std::vector<double>& terminal, const GridSpec& grid,
                                      const MarketParams& p, const SolverConfig& cfg = {});

/// Explicit counterpart (spatial operator on the known layer). Divergence is
/// a reported outcome, not an error: the field is flagged once any value
/// exceeds 1e6 * max|terminal| or stops being finite, and marching halts.
SolutionField explicit_solve_backward(const Payoff& terminal, const GridSpec& grid,
                                      const MarketParams& p, const SolverConfig& cfg = {});
SolutionField explicit_solve_backward(const std::vector<double>& terminal, const GridSpec& grid,
                                      const MarketParams& p, const SolverConfig& cfg = {});

/// Growth factor over max|terminal| beyond which an explicit field is
/// flagged diverged.
inline constexpr double k_divergence_factor = 1e6;

/// Closed-form price of the payoff under the linear Black-Scholes model at
/// time t, maturity T. Strangles and spreads price as linear combinations of
/// vanilla legs; sigma -> 0 is the deterministic limit. t > T is a domain
/// error; closed-form snapshots are not priceable here.
double linear_bs_price(const Payoff& payoff, double S, double t, const MarketParams& p,
                       double maturity);

/// Fully implicit finite-difference solution of the linear model on the same
/// grid machinery (the per-layer system is linear, so Newton certifies in one
/// iteration).
SolutionField linear_fd_solve(const Payoff& payoff, const GridSpec& grid, const MarketParams& p,
                              const SolverConfig& cfg = {});

}  // namespace nlbs
