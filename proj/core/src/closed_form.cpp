#include "nlbs/closed_form.hpp"

#include <cmath>
#include <limits>

#include "nlbs/model.hpp"

namespace nlbs {
namespace {

constexpr double k_third = 1.0 / 3.0;

// family evaluation pieces shared by invariant_y / invariant_u; computed with
// |m| (the family is even in m) and with the cancellation-free forms
//   B- = P / B+        (instead of Q - |m|)
//   a - b = 2|m| / (a^2 + ab + b^2)
struct FamilyTerms {
    double big_plus;    // |m| + sqrt(m^2 + P)
    double big_minus;   // sqrt(m^2 + P) - |m|
    double pow_sum;     // B+^{4/3} + B-^{4/3}
    double log_diff;    // cbrt(B+) - cbrt(B-), positive for m != 0
};

FamilyTerms family_terms(double abs_m, double P) {
    FamilyTerms f{};
    const double q = std::sqrt(abs_m * abs_m + P);
    f.big_plus = abs_m + q;
    f.big_minus = P / f.big_plus;
    f.pow_sum = f.big_plus * std::cbrt(f.big_plus) + f.big_minus * std::cbrt(f.big_minus);
    const double a = std::cbrt(f.big_plus);
    const double b = std::cbrt(f.big_minus);
    f.log_diff = 2.0 * abs_m / (a * a + a * b + b * b);
    return f;
}

void require_explicit_delta(const ClosedFormParams& params, const MarketParams& p,
                            const char* who) {
    const double pinned = p.sigma * p.sigma / 8.0;
    if (std::abs(params.delta - pinned) > 4.0 * std::numeric_limits<double>::epsilon() * pinned)
        throw std::domain_error(std::string(who) +
                                ": the explicit family requires delta = sigma^2/8");
}

}  // namespace

double reduce_coords(double S, double t, double delta) {
    if (!(S > 0.0)) throw std::domain_error("reduce_coords: S must be > 0");
    return std::log(S) - delta * t;
}

double invariant_y(double z, const ClosedFormParams& params, const MarketParams& p) {
    p.validate(/*nonlinear=*/true);
    require_explicit_delta(params, p, "invariant_y");
    const double P = 4.0 * std::exp(1.5 * z);
    const auto f = family_terms(std::abs(params.m), P);
    const double scale = std::pow(2.0, 4.0 * k_third) * std::exp(z);
    return -(1.0 + f.pow_sum / scale) / p.rho;
}

double invariant_u(double S, double t, const ClosedFormParams& params, const MarketParams& p) {
    if (!(S > 0.0)) throw std::domain_error("invariant_u: S must be > 0");
    p.validate(/*nonlinear=*/true);
    params.validate();
    require_explicit_delta(params, p, "invariant_u");
    if (params.m == 0.0) throw DegenerateFamily();

    const double s2 = p.sigma * p.sigma;
    const double P = 4.0 * std::pow(S, 1.5) * std::exp(-3.0 * s2 * t / 16.0);
    const auto f = family_terms(std::abs(params.m), P);
    if (!(f.log_diff > 0.0))
        throw std::domain_error("invariant_u: non-positive logarithm argument");

    const double lead = (S * std::log(S) - s2 * S * t / 8.0) / p.rho;
    const double pow_term =
        std::pow(2.0, -4.0 * k_third) * std::exp(s2 * t / 8.0) * f.pow_sum / p.rho;
    const double log_term = 4.0 * S * std::log(f.log_diff) / p.rho;
    return lead - pow_term - log_term + params.d1 * S + params.d2;
}

Surface invariant_surface(const ClosedFormParams& params, const MarketParams& p) {
    return [params, p](double S, double t) { return invariant_u(S, t, params, p); };
}

FamilyJet invariant_u_jet(double S, double t, const ClosedFormParams& params,
                          const MarketParams& p) {
    if (!(S > 0.0)) throw std::domain_error("invariant_u_jet: S must be > 0");
    p.validate(/*nonlinear=*/true);
    require_explicit_delta(params, p, "invariant_u_jet");
    if (params.m == 0.0) throw DegenerateFamily();

    const double mm = std::abs(params.m);
    const double s2 = p.sigma * p.sigma;
    const double rho = p.rho;
    const double w = std::exp(-3.0 * s2 * t / 16.0);
    const double sqrt_s = std::sqrt(S);

    const double P = 4.0 * S * sqrt_s * w;
    const double P_s = 6.0 * sqrt_s * w;
    const double P_ss = 3.0 * w / sqrt_s;
    const double P_t = -3.0 * s2 / 16.0 * P;

    const double q = std::sqrt(mm * mm + P);
    const double q_s = P_s / (2.0 * q);
    const double q_t = P_t / (2.0 * q);
    const double q_ss = P_ss / (2.0 * q) - P_s * P_s / (4.0 * q * q * q);

    const double big_plus = mm + q;
    const double big_minus = P / big_plus;
    const double a = std::cbrt(big_plus);
    const double b = std::cbrt(big_minus);
    const double pow_sum = big_plus * a + big_minus * b;       // Bp^{4/3} + Bm^{4/3}
    const double pow13_sum = a + b;                            // Bp^{1/3} + Bm^{1/3}
    const double pow_m23_sum = 1.0 / (a * a) + 1.0 / (b * b);  // Bp^{-2/3} + Bm^{-2/3}

    const double diff = 2.0 * mm / (a * a + a * b + b * b);
    const double log_diff = std::log(diff);
    const double p23 = std::cbrt(P) * std::cbrt(P);  // (Bp Bm)^{2/3}
    // d/dx ln(cbrt(Bp) - cbrt(Bm)) = -(Q_x/3)(a + b)/P^{2/3}, cancellation-free
    const double l_s = -(q_s / 3.0) * pow13_sum / p23;
    const double l_t = -(q_t / 3.0) * pow13_sum / p23;
    const double ab_s = q_s / 3.0 * (1.0 / (a * a) + 1.0 / (b * b));  // a_S + b_S
    const double l_ss = -(1.0 / 3.0) * (q_ss * pow13_sum / p23 +
                                        q_s * (ab_s / p23 -
                                               2.0 / 3.0 * pow13_sum * P_s / (p23 * P)));

    const double e8 = std::exp(s2 * t / 8.0);
    const double cb = std::pow(2.0, -4.0 * k_third) / rho;

    FamilyJet jet;
    const double lead = (S * std::log(S) - s2 * S * t / 8.0) / rho;
    const double lead_s = (std::log(S) + 1.0 - s2 * t / 8.0) / rho;
    const double lead_ss = 1.0 / (rho * S);
    const double lead_t = -s2 * S / (8.0 * rho);

    const double pow_term = -cb * e8 * pow_sum;
    const double pow_term_s = -cb * e8 * (4.0 * k_third) * pow13_sum * q_s;
    const double pow_term_ss =
        -cb * e8 * (4.0 * k_third) * (k_third * pow_m23_sum * q_s * q_s + pow13_sum * q_ss);
    const double pow_term_t =
        -cb * (s2 / 8.0 * e8 * pow_sum + e8 * (4.0 * k_third) * pow13_sum * q_t);

    const double log_term = -4.0 * S * log_diff / rho;
    const double log_term_s = -4.0 * (log_diff + S * l_s) / rho;
    const double log_term_ss = -4.0 * (2.0 * l_s + S * l_ss) / rho;
    const double log_term_t = -4.0 * S * l_t / rho;

    jet.u = lead + pow_term + log_term + params.d1 * S + params.d2;
    jet.u_s = lead_s + pow_term_s + log_term_s + params.d1;
    jet.u_ss = lead_ss + pow_term_ss + log_term_ss;
    jet.u_t = lead_t + pow_term_t + log_term_t;
    return jet;
}

double trivial_u(double S, double t, TrivialVariant variant, double c, const MarketParams& p,
                 double delta) {
    if (!(S > 0.0)) throw std::domain_error("trivial_u: S must be > 0");
    if (variant == TrivialVariant::linear) return c * S;
    if (!(delta > 0.0)) throw std::domain_error("trivial_u: delta must be > 0");
    const double root = std::sqrt(p.sigma * p.sigma / (2.0 * delta));
    const double sign = variant == TrivialVariant::loglinear_plus ? 1.0 : -1.0;
    return (1.0 + sign * root) / p.rho * (S * std::log(S) - delta * S * t) + c * S;
}

std::optional<double> exceptional_y(double delta, double sigma, double rho) {
    const double pinned = sigma * sigma / 8.0;
    if (std::abs(delta - pinned) <= std::numeric_limits<double>::epsilon() * pinned)
        return 1.0 / rho;
    return std::nullopt;
}

double ode_residual_v(double /*v*/, double v_z, double v_zz, const MarketParams& p,
                      double delta) {
    if (delta == 0.0) throw std::domain_error("ode_residual_v: delta must be nonzero");
    const double sum = v_z + v_zz;
    const double factor = 1.0 + p.rho * sum;
    return v_z * factor * factor - p.sigma * p.sigma / (2.0 * delta) * sum;
}

double ode_residual_y(double y, double y_z, const MarketParams& p, double delta) {
    if (y == 0.0) throw DivisionByZero("ode_residual_y: y must be nonzero");
    if (delta == 0.0) throw std::domain_error("ode_residual_y: delta must be nonzero");
    const double s2 = p.sigma * p.sigma;
    const double r2d = p.rho * p.rho * delta;
    const double mid = y * y + y / p.rho - s2 / (4.0 * r2d);
    const double last = y * y + 2.0 * y / p.rho + (2.0 * delta - s2) / (2.0 * r2d);
    return y_z * y_z + 2.0 * y_z / y * mid + last;
}

Surface apply_group(Surface u, const GroupElement& g) {
    return [u = std::move(u), g](double S_new, double t_new) {
        const double growth = std::exp(g.a1 * g.epsilon);
        const double S = S_new / growth;
        const double t = t_new - g.a2 * g.epsilon;
        const double val = u(S, t);
        if (g.a1 != 0.0)
            return val * growth + g.a3 * S * g.epsilon * growth +
                   g.a4 / g.a1 * (growth - 1.0);
        return val + g.a3 * S * g.epsilon + g.a4 * g.epsilon;
    };
}

std::pair<double, double> group_invariants(double S, double t, double u,
                                           const GroupElement& g) {
    if (!(S > 0.0)) throw std::domain_error("group_invariants: S must be > 0");
    const double log_s = std::log(S);
    return {g.a1 * t - g.a2 * log_s, g.a1 * u / S - g.a3 * log_s + g.a4 / S};
}

double asymptotic_small_s(double S, double t, const ClosedFormParams& params,
                          const MarketParams& p) {
    if (!(S > 0.0)) throw std::domain_error("asymptotic_small_s: S must be > 0");
    require_explicit_delta(params, p, "asymptotic_small_s");
    if (params.m == 0.0) throw DegenerateFamily();
    const double mm = std::abs(params.m);
    const double s2 = p.sigma * p.sigma;
    // leading constant carries the family's sign: u -> -|m|^{4/3} e^{s2 t/8}/rho
    const double c0 = -std::pow(mm, 4.0 * k_third) * std::exp(s2 * t / 8.0);
    const double lin = S * std::log(S) - S * (s2 * t / 8.0 + 4.0 * k_third * std::log(2.0 * mm));
    const double c32 = 8.0 * k_third * std::pow(mm, -2.0 * k_third) * std::exp(-s2 * t / 16.0);
    const double c2 = std::pow(mm, -4.0 * k_third) * std::exp(-s2 * t / 8.0);
    return (c0 + lin + c32 * std::pow(S, 1.5) + c2 * S * S) / p.rho;
}

double asymptotic_large_s(double S, double t, const ClosedFormParams& params,
                          const MarketParams& p) {
    if (!(S > 0.0)) throw std::domain_error("asymptotic_large_s: S must be > 0");
    require_explicit_delta(params, p, "asymptotic_large_s");
    if (params.m == 0.0) throw DegenerateFamily();
    const double mm = std::abs(params.m);
    const double s2 = p.sigma * p.sigma;
    const double lead = 3.0 * S * std::log(S);
    const double lin =
        -S * (3.0 * s2 * t / 8.0 + 4.0 * std::log(std::cbrt(2.0) * mm / 3.0) + 2.0);
    const double tail =
        -std::pow(2.0 / 3.0, 3.0) * std::exp(3.0 * s2 * t / 16.0) * mm * mm / std::sqrt(S);
    return (lead + lin + tail) / p.rho;
}

Greeks greeks(const VolSurface& u, double S, double t, const MarketParams& p,
              const GreekBumps& bumps) {
    const auto step = [&bumps](double x) {
        return std::max(bumps.relative * std::abs(x), bumps.floor);
    };
    const double hs = step(S);
    const double ht = step(t);
    const double hv = step(p.sigma);
    const double sig = p.sigma;

    Greeks g;
    const double up = u(S + hs, t, sig);
    const double down = u(S - hs, t, sig);
    const double mid = u(S, t, sig);
    g.delta = (up - down) / (2.0 * hs);
    g.gamma = (up - 2.0 * mid + down) / (hs * hs);
    g.theta = -(u(S, t + ht, sig) - u(S, t - ht, sig)) / (2.0 * ht);
    g.vega = (u(S, t, sig + hv) - u(S, t, sig - hv)) / (2.0 * hv);
    return g;
}

}  // namespace nlbs
