#include "nlbs/model.hpp"

#include <cmath>

#include "nlbs/closed_form.hpp"

namespace nlbs {

double pde_residual(double /*u*/, double u_t, double u_ss, double S, const MarketParams& p) {
    if (!(S > 0.0)) throw std::domain_error("pde_residual: S must be > 0");
    const double den = 1.0 - p.rho * S * u_ss;
    if (std::abs(den) < k_singular_floor) throw SingularDenominator(den);
    return u_t + 0.5 * p.sigma * p.sigma * S * S * u_ss / (den * den);
}

double payoff_value(const Payoff& payoff, double S) {
    if (S < 0.0) throw std::domain_error("payoff_value: S must be >= 0");
    struct Visitor {
        double S;
        double operator()(const Call& c) const {
            return c.quantity * std::max(S - c.strike, 0.0);
        }
        double operator()(const Strangle& st) const {
            return st.k_put * std::max(st.e_put - S, 0.0) +
                   st.k_call * std::max(S - st.e_call, 0.0);
        }
        double operator()(const BullSpread& b) const {
            return std::max(S - b.e_long, 0.0) - std::max(S - b.e_short, 0.0);
        }
        double operator()(const ClosedFormSnapshot& snap) const {
            return invariant_u(S, snap.at_time, snap.params, snap.market);
        }
    };
    return std::visit(Visitor{S}, payoff);
}

void validate_payoff(const Payoff& p) {
    struct Visitor {
        void operator()(const Call& c) const {
            if (!(c.strike > 0.0)) throw std::domain_error("call strike must be > 0");
            if (!(c.quantity > 0.0)) throw std::domain_error("call quantity must be > 0");
        }
        void operator()(const Strangle& s) const {
            if (!(s.e_put > 0.0) || !(s.e_call > 0.0))
                throw std::domain_error("strangle strikes must be > 0");
            if (!(s.e_put < s.e_call))
                throw std::domain_error("strangle requires e_put < e_call");
            if (!(s.k_put > 0.0) || !(s.k_call > 0.0))
                throw std::domain_error("strangle quantities must be > 0");
        }
        void operator()(const BullSpread& b) const {
            if (!(b.e_long > 0.0)) throw std::domain_error("spread strikes must be > 0");
            if (!(b.e_long < b.e_short))
                throw std::domain_error("bull spread requires e_long < e_short");
        }
        void operator()(const ClosedFormSnapshot& snap) const {
            snap.params.validate();
            snap.market.validate(/*nonlinear=*/true);
            if (snap.params.m == 0.0) throw DegenerateFamily();
        }
    };
    std::visit(Visitor{}, p);
}

double degenerate_surface(double S, double t, const std::function<double(double)>& c1,
                          const std::function<double(double)>& c2, double rho) {
    if (!(S > 0.0)) throw std::domain_error("degenerate_surface: S must be > 0");
    if (rho == 0.0) throw std::domain_error("degenerate_surface: rho must be nonzero");
    return S * std::log(S) / rho + S * c1(t) + c2(t);
}

double degenerate_surface(double S, double t, double c1, double c2, double rho) {
    return degenerate_surface(
        S, t, [c1](double) { return c1; }, [c2](double) { return c2; }, rho);
}

double rho_rescale(double u, double rho) { return rho * u; }

SolutionField rho_rescale(const SolutionField& field, double rho) {
    SolutionField out = field;
    for (double& v : out.values) v *= rho;
    return out;
}

}  // namespace nlbs
