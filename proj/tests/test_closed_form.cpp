#include <doctest.h>

#include <cmath>

#include "nlbs/closed_form.hpp"
#include "nlbs/model.hpp"
#include "test_support.hpp"

using namespace nlbs;

namespace {
const MarketParams kMarket{0.35, 0.1, 0.0};
const ClosedFormParams kMember = ClosedFormParams::explicit_family(0.5, 0.0, 0.0, 0.35);
}  // namespace

TEST_CASE("reduce_coords") {
    CHECK(reduce_coords(1.0, 0.0, 0.123) == 0.0);
    CHECK(reduce_coords(std::exp(1.0), 0.0, 0.7) == doctest::Approx(1.0).epsilon(1e-15));
    const double delta = 0.35 * 0.35 / 8.0;
    CHECK(reduce_coords(2.0, 1.0, delta) ==
          doctest::Approx(std::log(2.0) - 0.0153125).epsilon(1e-15));
    CHECK_THROWS_AS(reduce_coords(0.0, 0.0, delta), std::domain_error);
}

TEST_CASE("invariant_y: m = 0 limit and evenness") {
    const auto m0 = ClosedFormParams::explicit_family(0.0, 0.0, 0.0, 0.35);
    for (double z : {-2.0, -0.5, 0.0, 1.0, 3.0})
        CHECK(invariant_y(z, m0, kMarket) == doctest::Approx(-30.0).epsilon(1e-13));

    const auto plus = ClosedFormParams::explicit_family(0.8, 0.0, 0.0, 0.35);
    const auto minus = ClosedFormParams::explicit_family(-0.8, 0.0, 0.0, 0.35);
    for (double z : {-1.0, 0.0, 0.5, 2.0})
        CHECK(invariant_y(z, plus, kMarket) == invariant_y(z, minus, kMarket));
}

TEST_CASE("invariant_y satisfies the first-order equation") {
    const double delta = kMarket.sigma * kMarket.sigma / 8.0;
    for (double z : {-1.0, 0.0, 0.4, 1.5}) {
        const double y = invariant_y(z, kMember, kMarket);
        const double y_z = testsup::d1_central(
            [&](double zz) { return invariant_y(zz, kMember, kMarket); }, z, 1e-4);
        CHECK(std::abs(ode_residual_y(y, y_z, kMarket, delta)) <
              1e-8 * std::max(1.0, y * y));
    }
}

TEST_CASE("ode_residual_y: constant roots and the discriminant point") {
    const MarketParams p{0.3, 0.2, 0.0};
    for (double delta : {p.sigma * p.sigma / 8.0, p.sigma * p.sigma / 2.0, 0.05}) {
        const double root = std::sqrt(p.sigma * p.sigma / (2.0 * delta));
        for (double sign : {1.0, -1.0}) {
            const double y = (-1.0 + sign * root) / p.rho;
            if (std::abs(y) < 1e-12) continue;  // y = 0 is itself an excluded root
            CHECK(std::abs(ode_residual_y(y, 0.0, p, delta)) < 1e-12 * std::max(1.0, y * y));
        }
    }
    CHECK_THROWS_AS(ode_residual_y(0.0, 1.0, p, 0.01), DivisionByZero);

    // at delta = sigma^2/8 the point y = 1/rho kills F and dF/dy_z together
    const double delta = p.sigma * p.sigma / 8.0;
    const double y = 1.0 / p.rho;
    CHECK(std::abs(ode_residual_y(y, 0.0, p, delta)) < 1e-12 / (p.rho * p.rho));
    const double dF_dyz = testsup::d1_central(
        [&](double yz) { return ode_residual_y(y, yz, p, delta); }, 0.0, 1e-5);
    CHECK(std::abs(dF_dyz) < 1e-9);
}

TEST_CASE("exceptional_y exists only at delta = sigma^2/8") {
    CHECK(exceptional_y(0.35 * 0.35 / 8.0, 0.35, 0.1) == doctest::Approx(10.0));
    CHECK(!exceptional_y(0.35 * 0.35 / 4.0, 0.35, 0.1).has_value());

    // its integral z/rho + const is the lower-sign log-linear member: v_z = 1/rho
    const MarketParams p{0.35, 0.1, 0.0};
    const double delta = p.sigma * p.sigma / 8.0;
    const double t = 0.4;
    const auto v_of_z = [&](double z) {
        const double S = std::exp(z + delta * t);
        return -trivial_u(S, t, TrivialVariant::loglinear_minus, 0.7, p, delta) / S;
    };
    const double v_z = testsup::d1_central(v_of_z, 0.2, 1e-5);
    CHECK(v_z == doctest::Approx(1.0 / p.rho).epsilon(1e-9));
}

TEST_CASE("invariant_u: domain and degeneracy errors") {
    CHECK_THROWS_AS(invariant_u(0.0, 0.0, kMember, kMarket), std::domain_error);
    const auto m0 = ClosedFormParams::explicit_family(0.0, 0.0, 0.0, 0.35);
    CHECK_THROWS_AS(invariant_u(1.0, 0.0, m0, kMarket), DegenerateFamily);
    ClosedFormParams wrong_delta = kMember;
    wrong_delta.delta = 0.02;
    CHECK_THROWS_AS(invariant_u(1.0, 0.0, wrong_delta, kMarket), std::domain_error);
}

TEST_CASE("invariant_u pinned value and small-S limit") {
    // frozen high-precision evaluation of the family member
    CHECK(invariant_u(1.0, 0.5, kMember, kMarket) ==
          doctest::Approx(41.45373324458027).epsilon(1e-13));
    // as S -> 0 the member tends to -|m|^{4/3} e^{sigma^2 t/8} / rho
    const double limit = -std::pow(0.5, 4.0 / 3.0) / kMarket.rho;
    CHECK(invariant_u(1e-9, 0.0, kMember, kMarket) == doctest::Approx(limit).epsilon(1e-4));
}

TEST_CASE("invariant_u surface shape on the plotting domain") {
    // positive and increasing over the bulk of (0,2] x [0,1], convex near the
    // left edge where it approaches the degenerate surface
    for (double t : {0.0, 0.5, 1.0}) {
        double prev = invariant_u(0.3, t, kMember, kMarket);
        CHECK(prev > 0.0);
        for (double S = 0.4; S <= 2.0; S += 0.1) {
            const double v = invariant_u(S, t, kMember, kMarket);
            CHECK(v > prev);
            prev = v;
        }
        const Surface u = invariant_surface(kMember, kMarket);
        for (double S : {0.15, 0.3, 0.6}) {
            const double d2 =
                testsup::d2_central([&](double s) { return u(s, t); }, S, 1e-4 * S);
            CHECK(d2 > 0.0);
        }
    }
}

TEST_CASE("invariant_u is even in m and eps1-independent") {
    testsup::Rng rng;
    for (int i = 0; i < 40; ++i) {
        const double m = rng.uniform(0.05, 20.0);
        const double S = rng.uniform(0.05, 3.0);
        const double t = rng.uniform(0.0, 1.0);
        const auto a = ClosedFormParams::explicit_family(m, 0.0, 0.0, 0.35);
        const auto b = ClosedFormParams::explicit_family(-m, 0.0, 0.0, 0.35);
        CHECK(invariant_u(S, t, a, kMarket) == invariant_u(S, t, b, kMarket));

        // the two eps1 routes sum the same pair of fourth-root terms
        const double P = 4.0 * std::pow(S, 1.5) * std::exp(-3 * 0.35 * 0.35 * t / 16.0);
        const double q = std::sqrt(m * m + P);
        const auto quartic = [](double x) { return std::pow(std::abs(x), 4.0 / 3.0); };
        const double plus_route = quartic(m + q) + quartic(-m + q);
        const double minus_route = quartic(m - q) + quartic(-m - q);
        CHECK(plus_route == doctest::Approx(minus_route).epsilon(1e-14));
    }
}

TEST_CASE("analytic jet matches finite differences where those are accurate") {
    testsup::Rng rng;
    for (double m : {0.5, 8.5}) {
        const auto params = ClosedFormParams::explicit_family(m, 0.3, -1.0, 0.35);
        const Surface u = invariant_surface(params, kMarket);
        for (int i = 0; i < 15; ++i) {
            const double S = rng.uniform(0.3, 2.0);
            const double t = rng.uniform(0.0, 1.0);
            const FamilyJet jet = invariant_u_jet(S, t, params, kMarket);
            CHECK(jet.u == doctest::Approx(invariant_u(S, t, params, kMarket)).epsilon(5e-15));
            const double u_s = testsup::d1_central([&](double s) { return u(s, t); }, S, 1e-3 * S);
            const double u_ss = testsup::d2_central([&](double s) { return u(s, t); }, S, 1e-3 * S);
            const double u_t = testsup::d1_central([&](double tt) { return u(S, tt); }, t, 1e-3);
            CHECK(jet.u_s == doctest::Approx(u_s).epsilon(1e-8));
            CHECK(jet.u_ss == doctest::Approx(u_ss).epsilon(1e-6));
            CHECK(jet.u_t == doctest::Approx(u_t).epsilon(1e-8));
        }
    }
}

TEST_CASE("family residual property over the pinned sweep (reduced sample)") {
    // fd derivatives verify the benign members; the analytic jet (checked
    // against fd above) carries the near-degenerate m = 1338 member, where
    // fd loses the residual cancellation to the 1/den^3 amplification
    testsup::Rng rng;
    for (double m : {0.5, 1338.0}) {
        for (double rho : {0.05, 0.3}) {
            const MarketParams p{0.35, rho, 0.0};
            const auto params = ClosedFormParams::explicit_family(m, 0, 0, p.sigma);
            const Surface u = invariant_surface(params, p);
            for (int i = 0; i < 25; ++i) {
                const double S = rng.uniform(0.1, 2.0);
                const double t = rng.uniform(0.0, 1.0);
                CHECK(testsup::jet_relative_residual(S, t, params, p) < 1e-8);
                if (m < 10.0) CHECK(testsup::fd_relative_residual(u, S, t, p) < 1e-8);
            }
        }
    }
}

TEST_CASE("trivial_u examples") {
    const MarketParams p{0.35, 0.1, 0.0};
    CHECK(trivial_u(3.0, 0.7, TrivialVariant::linear, 2.0, p, 0.0) == 6.0);

    // at delta = sigma^2/2 the upper-sign coefficient becomes 2/rho
    const double delta = p.sigma * p.sigma / 2.0;
    const double S = 1.7, t = 0.4;
    const double expected = 2.0 / p.rho * (S * std::log(S) - delta * S * t);
    CHECK(trivial_u(S, t, TrivialVariant::loglinear_plus, 0.0, p, delta) ==
          doctest::Approx(expected).epsilon(1e-14));
    CHECK_THROWS_AS(trivial_u(1.0, 0.0, TrivialVariant::loglinear_plus, 0.0, p, -0.1),
                    std::domain_error);

    // residual check through the fd oracle
    const Surface surf = [&p](double s, double tt) {
        return trivial_u(s, tt, TrivialVariant::loglinear_minus, 0.3, p,
                         p.sigma * p.sigma / 8.0);
    };
    for (double s : {0.3, 1.0, 4.0})
        CHECK(testsup::fd_relative_residual(surf, s, 0.5, p) < 1e-8);
}

TEST_CASE("ode_residual_v: constant and log-linear roots, reduction consistency") {
    const MarketParams p{0.35, 0.1, 0.0};
    const double delta = p.sigma * p.sigma / 8.0;
    CHECK(ode_residual_v(12.0, 0.0, 0.0, p, delta) == 0.0);
    const double root = std::sqrt(p.sigma * p.sigma / (2.0 * delta));
    for (double sign : {1.0, -1.0}) {
        const double v_z = -(1.0 + sign * root) / p.rho;
        CHECK(std::abs(ode_residual_v(0.0, v_z, 0.0, p, delta)) < 1e-12 / p.rho);
    }
    CHECK_THROWS_AS(ode_residual_v(0.0, 1.0, 1.0, p, 0.0), std::domain_error);

    // v = -u/S as a function of z satisfies the reduced equation; v_z = y
    const double t = 0.3;
    const auto v_of_z = [&](double z) {
        const double S = std::exp(z + delta * t);
        return -invariant_u(S, t, kMember, kMarket) / S;
    };
    for (double z : {-0.5, 0.0, 0.8}) {
        const double v = v_of_z(z);
        const double v_z = testsup::d1_central(v_of_z, z, 1e-4);
        const double v_zz = testsup::d2_central(v_of_z, z, 1e-3);
        CHECK(std::abs(ode_residual_v(v, v_z, v_zz, kMarket, delta)) <
              1e-8 * std::max(1.0, std::abs(v_z) * std::abs(v_z) * std::abs(v_z)));
        CHECK(v_z == doctest::Approx(invariant_y(z, kMember, kMarket)).epsilon(1e-8));
    }
}

TEST_CASE("apply_group: identity, additive branch, solution closure") {
    const Surface zero = [](double, double) { return 0.0; };
    const Surface id = apply_group(zero, GroupElement{1.0, 0.5, 0.3, 0.7, 0.0});
    CHECK(id(1.7, 0.4) == 0.0);

    const Surface shifted = apply_group(zero, GroupElement{0.0, 0.0, 1.0, 2.0, 1.0});
    testsup::Rng rng;
    for (int i = 0; i < 10; ++i) {
        const double S = rng.uniform(0.1, 10.0);
        CHECK(shifted(S, 0.0) == doctest::Approx(S + 2.0).epsilon(1e-15));
    }

    // a full four-parameter element maps the family member to a solution
    const Surface member = invariant_surface(kMember, kMarket);
    const Surface moved = apply_group(member, GroupElement{0.4, 0.3, -0.8, 1.2, 0.9});
    for (int i = 0; i < 20; ++i) {
        const double S = rng.uniform(0.2, 2.0);
        const double t = rng.uniform(0.2, 0.8);
        CHECK(testsup::fd_relative_residual(moved, S, t, kMarket) < 1e-7);
    }
}

TEST_CASE("group invariants stay constant along orbits") {
    const GroupElement g{0.7, -0.4, 1.1, 0.6, 0.0};
    const Surface member = invariant_surface(kMember, kMarket);
    const double S = 1.3, t = 0.5;
    const auto base = group_invariants(S, t, member(S, t), g);
    for (double eps : {-2.0, -0.7, 0.4, 1.0, 2.0}) {
        GroupElement moved = g;
        moved.epsilon = eps;
        const double growth = std::exp(g.a1 * eps);
        const double S_new = S * growth;
        const double t_new = t + g.a2 * eps;
        const double u_new = apply_group(member, moved)(S_new, t_new);
        const auto inv = group_invariants(S_new, t_new, u_new, g);
        CHECK(inv.first == doctest::Approx(base.first).epsilon(1e-12));
        CHECK(inv.second == doctest::Approx(base.second).epsilon(1e-11));
    }

    CHECK(group_invariants(2.0, 5.0, 1.0, GroupElement{1, 0, 0, 0, 0}).first == 5.0);
    CHECK(group_invariants(1.0, 0.0, 3.5, GroupElement{1, 0, 7, 0, 0}).second == 3.5);
    CHECK_THROWS_AS(group_invariants(0.0, 0.0, 0.0, g), std::domain_error);
}

TEST_CASE("small-S asymptotic: leading term and remainder order") {
    const double t = 0.7;
    const double lead = invariant_u(1e-10, t, kMember, kMarket);
    const double expected =
        -std::pow(0.5, 4.0 / 3.0) * std::exp(0.35 * 0.35 * t / 8.0) / kMarket.rho;
    CHECK(lead == doctest::Approx(expected).epsilon(1e-4));
    CHECK(asymptotic_small_s(1e-10, t, kMember, kMarket) ==
          doctest::Approx(expected).epsilon(1e-4));
    // at t = 0 and m = 1 the magnitude of the leading term is 1/rho
    const auto m1 = ClosedFormParams::explicit_family(1.0, 0.0, 0.0, 0.35);
    CHECK(std::abs(asymptotic_small_s(1e-12, 0.0, m1, kMarket)) ==
          doctest::Approx(1.0 / kMarket.rho).epsilon(1e-5));

    double prev = std::numeric_limits<double>::infinity();
    for (double S = 1e-2; S >= 0.9e-5; S /= 2.0) {
        const double rem = invariant_u(S, t, kMember, kMarket) -
                           asymptotic_small_s(S, t, kMember, kMarket);
        const double scaled = std::abs(rem) / std::pow(S, 2.5);
        CHECK(scaled < 20.0);
        CHECK(scaled < prev * 1.05);  // scaled remainder does not grow as S halves
        prev = scaled;
    }
}

TEST_CASE("large-S asymptotic: shared leading term and remainder order") {
    const double t = 0.7;
    // main term 3 S lnS / rho dominates independently of m and t
    const auto m10 = ClosedFormParams::explicit_family(10.0, 0.0, 0.0, 0.35);
    const double r6 = invariant_u(1e6, 0.0, kMember, kMarket) /
                      invariant_u(1e6, 0.0, m10, kMarket);
    const double r8 = invariant_u(1e8, 0.0, kMember, kMarket) /
                      invariant_u(1e8, 0.0, m10, kMarket);
    CHECK(std::abs(r6 - 1.0) < 0.5);
    CHECK(std::abs(r8 - 1.0) < std::abs(r6 - 1.0));

    // two decades of S; past S ~ 1e3 the true remainder falls below the
    // float64 resolution of u itself (|u| ~ 3 S lnS / rho)
    for (double S = 10.0; S <= 1.1e3; S *= 2.0) {
        const double rem = invariant_u(S, t, kMember, kMarket) -
                           asymptotic_large_s(S, t, kMember, kMarket);
        CHECK(std::abs(rem) * std::pow(S, 1.25) < 0.01);
    }
}

TEST_CASE("greeks: linear surface, degenerate gamma, figure members") {
    const MarketParams p{0.35, 0.1, 0.0};
    const VolSurface linear = [](double S, double, double) { return 2.5 * S; };
    const Greeks g = greeks(linear, 1.2, 0.5, p);
    CHECK(g.delta == doctest::Approx(2.5).epsilon(1e-10));
    CHECK(std::abs(g.gamma) < 1e-6);
    CHECK(std::abs(g.theta) < 1e-12);
    CHECK(std::abs(g.vega) < 1e-12);

    const VolSurface degenerate = [&p](double S, double t, double) {
        return degenerate_surface(S, t, 0.1, 0.2, p.rho);
    };
    for (double S : {0.5, 2.0, 25.0}) {
        const Greeks dg = greeks(degenerate, S, 0.3, p);
        CHECK(dg.gamma == doctest::Approx(1.0 / (p.rho * S)).epsilon(1e-6));
    }

    // the delta panel member: rho*delta increases monotonically in S
    const MarketParams fig{0.28, 0.1, 0.0};
    const VolSurface member = [](double S, double t, double sigma) {
        MarketParams q{sigma, 0.1, 0.0};
        return invariant_u(S, t, ClosedFormParams::explicit_family(8.5, 0, 0, sigma), q);
    };
    double prev = -std::numeric_limits<double>::infinity();
    for (double S = 2.5; S <= 100.0; S += 2.5) {
        const double d = fig.rho * greeks(member, S, 0.5, fig).delta;
        CHECK(d > prev);
        prev = d;
    }

    // the theta/vega panel members evaluate cleanly and vega matches a direct bump
    const MarketParams theta_p{0.2, 0.1, 0.0};
    const VolSurface theta_member = [](double S, double t, double sigma) {
        MarketParams q{sigma, 0.1, 0.0};
        return invariant_u(S, t, ClosedFormParams::explicit_family(-1.7, 0, 0, sigma), q);
    };
    CHECK(std::isfinite(greeks(theta_member, 50.0, 0.5, theta_p).theta));

    const VolSurface vega_member = [](double S, double t, double sigma) {
        MarketParams q{sigma, 0.1, 0.0};
        return invariant_u(S, t, ClosedFormParams::explicit_family(0.5, 0, 0, sigma), q);
    };
    const double v = greeks(vega_member, 1.0, 0.5, p).vega;
    const double h = 1e-4 * p.sigma;
    const double direct = (vega_member(1.0, 0.5, p.sigma + h) -
                           vega_member(1.0, 0.5, p.sigma - h)) / (2.0 * h);
    CHECK(v == doctest::Approx(direct).epsilon(1e-12));
}
