#include <cmath>
#include <vector>

#include <catch_amalgamated.hpp>

#include "fixtures.hpp"

using namespace jumpopt;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const std::vector<double> kGammas{0.0, 0.25, 0.5, 0.75, 0.9};

// Independent h: Simpson over the exponential density, no library quadrature.
double h_oracle(const RegimeParams& p, double lambda, double gamma, double pi) {
    const bool pos = std::holds_alternative<ExponentialPositive>(p.dist.law());
    const double rate = pos ? std::get<ExponentialPositive>(p.dist.law()).rate : std::get<ExponentialNegative>(p.dist.law()).rate;
    auto g = [&](double y) { return std::expm1(y) / std::pow(1.0 + pi * std::expm1(y), 1.0 - gamma); };
    return p.mu + lambda * fx::exp_expect(rate, pos ? 1.0 : -1.0, g);
}

void check_invariants(const PortfolioChoice& c, const RegimeParams& p, const ConstraintSet& K, const HParams& hp) {
    INFO(choice_summary(c));
    CHECK(K.contains(c.pi));
    CHECK(feasible_portfolios(hp.dist, hp.transform).contains(c.pi));
    CHECK(conjugate_gk(p.margin, p.r, K, c.zeta).is_finite());
    CHECK(verify_conjugacy(p.margin, p.r, K, c.pi, c.zeta) <= 1e-9);
    CHECK_THAT(c.zeta, WithinAbs(p.r - c.h_at_pi, 1e-11));
}

}  // namespace

TEST_CASE("h anchors") {
    const auto hp = fx::hp(fx::fig1_params());
    CHECK_THAT(h_value(hp, 0.5, 0.0), WithinAbs(-0.05 + (10.0 / 9.0 - 1.0), 1e-15));
    CHECK_THAT(h_value(hp, 0.5, 0.0), WithinAbs(0.0611111, 1e-7));
    CHECK_THAT(h_value(hp, 0.5, 1.0), WithinAbs(-0.05 + 10.0 / 9.5 - 10.0 / 10.5, 1e-15));
    CHECK_THAT(h_value(hp, 0.5, 1.0), WithinAbs(0.0502506, 1e-7));
    auto still = hp;
    still.lambda = 0.0;
    for (double pi : {-3.0, 0.0, 2.0}) CHECK(h_value(still, 0.3, pi) == -0.05);
}

TEST_CASE("h against an independent Simpson oracle") {
    for (const auto& p : {fx::fig1_params(), fx::fig3_params()}) {
        const auto hp = fx::hp(p);
        const bool pos = std::holds_alternative<ExponentialPositive>(p.dist.law());
        for (double g : kGammas)
            for (double pi : pos ? std::vector<double>{0.0, 0.3, 1.0, 2.5, 10.0} : std::vector<double>{-10.0, -2.0, 0.0, 0.5, 1.0}) {
                INFO("gamma " << g << " pi " << pi);
                CHECK_THAT(h_value(hp, g, pi, {false}), WithinAbs(h_oracle(p, 1.0, g, pi), 1e-9));
                CHECK_THAT(h_value(hp, g, pi), WithinAbs(h_value(hp, g, pi, {false}), 1e-9));
            }
    }
}

TEST_CASE("h is strictly decreasing and h' matches finite differences") {
    for (const auto& p : {fx::fig1_params(), fx::fig3_params()}) {
        const auto hp = fx::hp(p);
        const bool pos = std::holds_alternative<ExponentialPositive>(p.dist.law());
        const double lo = pos ? 0.0 : -10.0, hi = pos ? 3.0 : 1.0;
        for (double g : kGammas) {
            double prev = h_value(hp, g, lo);
            for (int k = 1; k < 100; ++k) {
                const double pi = lo + (hi - lo) * k / 99.0;
                const double h = h_value(hp, g, pi);
                CHECK(h < prev);
                prev = h;
                if (k < 99) {
                    const double d = 1e-5;
                    const double fd = (h_value(hp, g, pi + d, {false}) - h_value(hp, g, pi - d, {false})) / (2 * d);
                    INFO("gamma " << g << " pi " << pi);
                    CHECK_THAT(h_derivative(hp, g, pi), WithinRel(fd, 1e-6));
                }
            }
        }
    }
}

TEST_CASE("h inverse") {
    const auto hp = fx::hp(fx::fig1_params());
    for (double g : kGammas) {
        const double target = h_value(hp, g, 0.5);
        CHECK_THAT(h_inverse(hp, g, target, Interval::at_least(0.0)), WithinAbs(0.5, 1e-10));
    }
    const double pi = h_inverse(hp, 0.5, 0.05, Interval::at_least(0.0));
    CHECK(pi > 1.0);
    CHECK_THAT(h_value(hp, 0.5, pi), WithinAbs(0.05, 1e-12));
    try {
        (void)h_inverse(hp, 0.5, 0.07, Interval::at_least(0.0));
        FAIL("expected a range error");
    } catch (const RangeError& e) {
        CHECK_THAT(e.range_hi(), WithinAbs(h_value(hp, 0.5, 0.0), 1e-15));
    }
}

TEST_CASE("differential rates: all four cases") {
    const auto p = fx::fig1_params();
    const auto hp = fx::hp(p);
    const auto K = ConstraintSet::no_short_selling();

    auto c = optimal_portfolio_diffrates(hp, 0.07, 0.08, 0.5);
    CHECK(c.case_label == 1);
    CHECK(c.pi == 0.0);
    check_invariants(c, {0.07, p.mu, DifferentialRates{0.08}, p.dist}, K, hp);

    c = optimal_portfolio_diffrates(hp, 0.045, 0.05, 0.0);
    CHECK(c.case_label == 2);
    CHECK_THAT(h_value(hp, 0.0, c.pi), WithinAbs(0.045, 1e-12));
    CHECK(c.pi > 0.0);
    CHECK(c.pi < 1.0);
    check_invariants(c, p, K, hp);

    c = optimal_portfolio_diffrates(hp, 0.045, 0.05, 0.25);
    CHECK(c.case_label == 3);
    CHECK(c.pi == 1.0);
    check_invariants(c, p, K, hp);

    c = optimal_portfolio_diffrates(hp, 0.045, 0.05, 0.5);
    CHECK(c.case_label == 4);
    CHECK(c.pi > 1.0);
    CHECK_THAT(h_value(hp, 0.5, c.pi), WithinAbs(0.05, 1e-12));
    CHECK_THAT(c.zeta, WithinAbs(-0.005, 1e-15));
    check_invariants(c, p, K, hp);

    auto bad = hp;
    bad.mu = 0.06;
    CHECK_THROWS_AS(optimal_portfolio_diffrates(bad, 0.045, 0.05, 0.5), InfeasibleModel);
}

TEST_CASE("short rebate: all four cases") {
    const auto K = ConstraintSet::no_borrowing();
    const auto base = fx::fig3_params();
    auto run = [&](double mu, double gamma) {
        auto p = base;
        p.mu = mu;
        const auto hp = fx::hp(p);
        const auto c = optimal_portfolio_short(hp, 0.03, 0.05, gamma);
        check_invariants(c, p, K, hp);
        return c;
    };
    auto c = run(0.07, 0.5);
    CHECK(c.case_label == 1);
    CHECK(c.pi < 0.0);
    CHECK_THAT(h_value(fx::hp(base), 0.5, c.pi), WithinAbs(0.01, 1e-12));
    c = run(0.12, 0.5);
    CHECK(c.case_label == 2);
    CHECK(c.pi == 0.0);
    // pi = 0 on this branch does not depend on risk aversion
    for (double g : kGammas) CHECK(run(0.12, g).pi == 0.0);
    c = run(0.125, 0.5);
    CHECK(c.case_label == 3);
    CHECK(c.pi > 0.0);
    CHECK(c.pi < 1.0);
    c = run(0.2, 0.5);
    CHECK(c.case_label == 4);
    CHECK(c.pi == 1.0);

    auto bad = fx::hp(base);
    bad.mu = 0.0;
    CHECK_THROWS_AS(optimal_portfolio_short(bad, 0.03, 0.05, 0.5), InfeasibleModel);
}

TEST_CASE("generic solver agrees with the named case analysis") {
    for (double g : {0.0, 0.25, 0.5, 0.75, 0.9, 0.99}) {
        const auto p1 = fx::fig1_params();
        const auto a = optimal_portfolio_diffrates(fx::hp(p1), p1.r, 0.05, g);
        const auto b = optimal_portfolio_generic(fx::hp(p1), p1.margin, p1.r, ConstraintSet::no_short_selling(), g);
        INFO("gamma " << g);
        CHECK_THAT(b.pi, WithinRel(a.pi, 1e-9));
        CHECK_THAT(b.zeta, WithinAbs(a.zeta, 1e-9));
        const auto p3 = fx::fig3_params();
        const auto c = optimal_portfolio_short(fx::hp(p3), p3.r, 0.05, g);
        const auto d = optimal_portfolio_generic(fx::hp(p3), p3.margin, p3.r, ConstraintSet::no_borrowing(), g);
        CHECK_THAT(d.pi, WithinRel(c.pi, 1e-9));
        CHECK_THAT(d.zeta, WithinAbs(c.zeta, 1e-9));
    }
}

TEST_CASE("generic solver on a bounded K and a three-piece margin") {
    const RegimeParams p{0.02, 0.05, PiecewiseLinearConcave{{-0.5, 1.5}, {0.01, 0.0, -0.03}}, JumpDistribution(TwoPoint{-0.1, 0.1, 0.5})};
    const auto m = single_regime_model(2.0, p, ConstraintSet{-1.0, 2.0});
    for (double g : kGammas) {
        const auto c = optimal_portfolio(m, 0, g);
        check_invariants(c, p, m.K, h_params(m, 0));
    }
}

TEST_CASE("gamma sweep is continuous across case boundaries") {
    for (const auto& p : {fx::fig1_params(), fx::fig3_params()}) {
        const auto hp = fx::hp(p);
        const bool dr = std::holds_alternative<DifferentialRates>(p.margin);
        double prev = 0.0;
        for (int k = 0; k < 200; ++k) {
            const double g = 0.9 * k / 199.0;
            const auto c = dr ? optimal_portfolio_diffrates(hp, p.r, 0.05, g) : optimal_portfolio_short(hp, p.r, 0.05, g);
            if (k > 0) {
                // local slope bound from h' and dh/dgamma through finite differences
                const double dg = 0.9 / 199.0;
                INFO("gamma " << g << " pi " << c.pi << " prev " << prev);
                CHECK(std::abs(c.pi - prev) <= 1e-10 + 50.0 * dg * std::max(1.0, std::abs(c.pi)));
            }
            prev = c.pi;
        }
    }
}

TEST_CASE("log policy consumption and infeasibility") {
    const auto m = fx::fig1_model();
    const auto pol = log_optimal_policy(m, 3.0, 2.0);
    REQUIRE(std::holds_alternative<ProportionalConsumption>(pol.consumption));
    CHECK(std::get<ProportionalConsumption>(pol.consumption).scale == 1.0);  // x/(T+1) with V^{1,pi,0}_0 = 1

    const RegimeParams drift{0.02, 0.05, Frictionless{}, JumpDistribution(ExponentialPositive{10.0})};
    CHECK_THROWS_AS(log_optimal_policy(single_regime_model(0.0, drift, ConstraintSet::real_line()), 1.0, 1.0), InfeasibleModel);
    const auto boxed = log_optimal_policy(single_regime_model(0.0, drift, ConstraintSet{0.0, 1.0}), 1.0, 1.0);
    CHECK(boxed.choice[0].pi == 1.0);
}

TEST_CASE("conjugacy check rejects dual values outside the domain") {
    CHECK_THROWS_AS(verify_conjugacy(DifferentialRates{0.05}, 0.045, ConstraintSet::no_short_selling(), 2.0, -0.01), DomainError);
    CHECK(verify_conjugacy(DifferentialRates{0.05}, 0.045, ConstraintSet::no_short_selling(), 0.0, 0.003) == 0.0);
}
