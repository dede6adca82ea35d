#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace nlbs {

// ---------------------------------------------------------------------------
// Error types
// ---------------------------------------------------------------------------

/// The PDE denominator |1 - rho*S*u_SS| fell below the singularity floor:
/// the state touched the degenerate surface on which the equation blows up.
struct SingularDenominator : std::runtime_error {
    double denominator;
    explicit SingularDenominator(double den)
        : std::runtime_error("singular PDE denominator: |1 - rho*S*u_SS| = " +
                             std::to_string(den)),
          denominator(den) {}
};

/// Newton failed to certify the residual tolerance.
struct NoConvergence : std::runtime_error {
    int iterations;
    double residual_norm;
    int layer;  ///< time-layer index when raised by a marching solver, else -1
    NoConvergence(int iters, double norm, int layer_index = -1)
        : std::runtime_error("no convergence after " + std::to_string(iters) +
                             " iterations, residual " + std::to_string(norm) +
                             (layer_index >= 0 ? " at layer " + std::to_string(layer_index)
                                               : std::string{})),
          iterations(iters),
          residual_norm(norm),
          layer(layer_index) {}
};

struct SingularJacobian : std::runtime_error {
    SingularJacobian() : std::runtime_error("singular Jacobian") {}
};

/// m = 0 selects the log-linear solutions, not the two-parameter family.
struct DegenerateFamily : std::domain_error {
    DegenerateFamily() : std::domain_error("m = 0: use the log-linear solution instead") {}
};

struct DivisionByZero : std::domain_error {
    explicit DivisionByZero(const std::string& what) : std::domain_error(what) {}
};

// ---------------------------------------------------------------------------
// Market and grid
// ---------------------------------------------------------------------------

/// Model parameters. `rate` is used only by the linear reference pricer;
/// the nonlinear equation has no drift or discounting term.
struct MarketParams {
    double sigma = 0.0;  ///< volatility per sqrt(year)
    double rho = 0.0;    ///< illiquidity (price-impact) parameter; 1/(rho*S) is market depth
    double rate = 0.0;   ///< risk-free rate per year (linear model only)

    /// Throws std::domain_error on invalid values. The nonlinear equation
    /// additionally requires rho > 0 (its solutions blow up as rho -> 0).
    void validate(bool nonlinear) const {
        if (!(sigma > 0.0)) throw std::domain_error("sigma must be > 0");
        if (rate < 0.0) throw std::domain_error("rate must be >= 0");
        if (nonlinear && !(rho > 0.0))
            throw std::domain_error("rho must be > 0 for the nonlinear model");
    }
};

/// Uniform space/time mesh on [s_min, s_max] x [0, maturity]. `n_space` counts
/// all space nodes (boundaries included); `n_time` counts time steps, so a
/// field stores n_time + 1 layers. S = 0 is excluded by construction.
struct GridSpec {
    double s_min = 0.0;
    double s_max = 0.0;
    std::size_t n_space = 0;
    std::size_t n_time = 0;
    double maturity = 0.0;

    double h() const { return (s_max - s_min) / static_cast<double>(n_space - 1); }
    double tau() const { return maturity / static_cast<double>(n_time); }
    double node(std::size_t i) const { return s_min + h() * static_cast<double>(i); }
    double time(std::size_t j) const { return tau() * static_cast<double>(j); }
    std::size_t n_interior() const { return n_space - 2; }

    void validate() const {
        if (!(s_min > 0.0)) throw std::domain_error("s_min must be > 0");
        if (!(s_max > s_min)) throw std::domain_error("s_max must exceed s_min");
        if (n_space < 3) throw std::domain_error("n_space must be >= 3");
        if (n_time < 1) throw std::domain_error("n_time must be >= 1");
        if (!(maturity > 0.0)) throw std::domain_error("maturity must be > 0");
    }
};

// ---------------------------------------------------------------------------
// Closed-form family parameters
// ---------------------------------------------------------------------------

/// Constants selecting one member of the invariant solution family.
/// The explicit family is available only at delta = sigma^2/8; use
/// ClosedFormParams::explicit_family to pin that choice.
struct ClosedFormParams {
    double m = 0.0;      ///< family constant; the family is even in m, m = 0 degenerates
    double d1 = 0.0;     ///< additive slope constant (currency per unit S)
    double d2 = 0.0;     ///< additive constant (currency)
    double delta = 0.0;  ///< reduction constant of z = ln S - delta*t, > 0
    int eps2 = +1;       ///< sign choice in the logarithm; value-irrelevant with real roots

    static ClosedFormParams explicit_family(double m, double d1, double d2, double sigma) {
        return ClosedFormParams{m, d1, d2, sigma * sigma / 8.0, +1};
    }

    void validate() const {
        if (!(delta > 0.0)) throw std::domain_error("delta must be > 0");
        if (eps2 != 1 && eps2 != -1) throw std::domain_error("eps2 must be +1 or -1");
    }
};

// ---------------------------------------------------------------------------
// Payoffs
// ---------------------------------------------------------------------------

/// K European calls struck at E.
struct Call {
    double strike = 0.0;
    double quantity = 1.0;
};

/// K_P puts at E_P plus K_C calls at E_C, E_P < E_C.
struct Strangle {
    double e_put = 0.0;
    double e_call = 0.0;
    double k_put = 1.0;
    double k_call = 1.0;
};

/// Long call at e_long minus short call at e_short, e_long < e_short.
struct BullSpread {
    double e_long = 0.0;
    double e_short = 0.0;
};

/// Terminal data taken from the invariant family at a fixed time.
struct ClosedFormSnapshot {
    ClosedFormParams params;
    MarketParams market;
    double at_time = 0.0;
};

using Payoff = std::variant<Call, Strangle, BullSpread, ClosedFormSnapshot>;

void validate_payoff(const Payoff& p);

// ---------------------------------------------------------------------------
// Solution fields
// ---------------------------------------------------------------------------

enum class Scheme {
    fully_implicit,
    forward_explicit,
    linear_analytic,
    linear_fd,
    closed_form,
};

/// Per-layer solver diagnostics, indexed by time layer (layer n_time is the
/// terminal condition and carries no solve).
struct SolveDiagnostics {
    std::vector<int> newton_iterations;
    std::vector<double> residual_norms;  ///< final max-norms of the difference system
    int diverged_layer = -1;             ///< layer where explicit marching blew up, or -1
};

/// Grid-sampled hedge-cost surface u(S_i, t_j), layer-major storage.
struct SolutionField {
    GridSpec grid;
    Scheme scheme = Scheme::fully_implicit;
    std::vector<double> values;  ///< (n_time+1) * n_space, layer-major
    bool diverged = false;
    SolveDiagnostics diagnostics;

    SolutionField() = default;
    SolutionField(const GridSpec& g, Scheme s)
        : grid(g), scheme(s), values((g.n_time + 1) * g.n_space, 0.0) {}

    double& at(std::size_t layer, std::size_t i) { return values[layer * grid.n_space + i]; }
    double at(std::size_t layer, std::size_t i) const {
        return values[layer * grid.n_space + i];
    }
    /// Copy of one time layer (0 = today, n_time = terminal).
    std::vector<double> layer(std::size_t j) const {
        auto first = values.begin() + static_cast<std::ptrdiff_t>(j * grid.n_space);
        return std::vector<double>(first, first + static_cast<std::ptrdiff_t>(grid.n_space));
    }
};

}  // namespace nlbs
