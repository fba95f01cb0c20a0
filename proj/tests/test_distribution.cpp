#include <catch_amalgamated.hpp>

#include "fixtures.hpp"

using namespace jumpopt;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("exponential laws are normalized and live on their half-line") {
    const JumpDistribution pos(ExponentialPositive{10.0});
    const JumpDistribution neg(ExponentialNegative{10.0});
    CHECK_THAT(expect(pos, [](double) { return 1.0; }), WithinAbs(1.0, 1e-12));
    CHECK_THAT(expect(neg, [](double) { return 1.0; }), WithinAbs(1.0, 1e-12));
    CHECK_THAT(expect(pos, [](double y) { return y < 0.0 ? 1.0 : 0.0; }), WithinAbs(0.0, 1e-15));
    CHECK_THAT(expect(neg, [](double y) { return y > 0.0 ? 1.0 : 0.0; }), WithinAbs(0.0, 1e-15));
    CHECK(pos.support().contains(0.0));
    CHECK_FALSE(pos.support().contains(-0.1));
    CHECK_FALSE(neg.support().contains(0.1));
    CHECK_THAT(pos.mean(), WithinRel(0.1, 1e-14));
    CHECK_THAT(neg.mean(), WithinRel(-0.1, 1e-14));
}

TEST_CASE("mgf closed forms") {
    const JumpDistribution pos(ExponentialPositive{10.0});
    const JumpDistribution neg(ExponentialNegative{10.0});
    const JumpDistribution two(TwoPoint{-0.2, 0.3, 0.25});
    for (const auto* d : {&pos, &neg, &two}) CHECK(mgf(*d, 0.0) == 1.0);
    CHECK_THAT(mgf(pos, 1.0), WithinRel(10.0 / 9.0, 1e-15));
    CHECK_THAT(mgf(neg, 1.0), WithinRel(10.0 / 11.0, 1e-15));
    CHECK_THAT(mgf(two, 2.0), WithinRel(0.75 * std::exp(-0.4) + 0.25 * std::exp(0.6), 1e-15));
}

TEST_CASE("mgf domain is the analytic domain of the variant") {
    const JumpDistribution pos(ExponentialPositive{10.0});
    const JumpDistribution neg(ExponentialNegative{10.0});
    CHECK_THROWS_AS(mgf(pos, 10.0), DomainError);
    CHECK_THROWS_AS(mgf(neg, -10.0), DomainError);
    CHECK_NOTHROW(mgf(pos, -1e6));
    CHECK_NOTHROW(mgf(neg, 1e6));
    const JumpDistribution two(TwoPoint{-0.2, 0.3, 0.25});
    CHECK(std::isfinite(mgf(two, 50.0)));
}

TEST_CASE("expect against an independent Simpson oracle") {
    const JumpDistribution pos(ExponentialPositive{10.0});
    const JumpDistribution neg(ExponentialNegative{10.0});
    auto g = [](double y) { return std::log1p(0.7 * std::expm1(y)); };
    CHECK_THAT(expect(pos, g), WithinAbs(fx::exp_expect(10.0, 1.0, g), 1e-10));
    CHECK_THAT(expect(neg, g), WithinAbs(fx::exp_expect(10.0, -1.0, g), 1e-10));
    CHECK_THAT(expect(pos, [](double y) { return std::expm1(y); }), WithinAbs(1.0 / 9.0, 1e-12));
    CHECK_THAT(expect(pos, [](double y) { return std::exp(y); }), WithinAbs(mgf(pos, 1.0), 1e-12));
}

TEST_CASE("mgf and quadrature agree across the domain") {
    // Checked on |s| <= 0.95 rate; closer to the pole the integrand outgrows
    // double range in the tail before the weight kills it.
    const JumpDistribution pos(ExponentialPositive{10.0});
    const JumpDistribution neg(ExponentialNegative{10.0});
    for (double s = -9.5; s <= 9.5; s += 0.5) {
        CHECK_THAT(expect(pos, [s](double y) { return std::exp(s * y); }), WithinRel(mgf(pos, s), 1e-8));
        CHECK_THAT(expect(neg, [s](double y) { return std::exp(s * y); }), WithinRel(mgf(neg, s), 1e-8));
    }
}

TEST_CASE("tabulated laws integrate by trapezoid on their own grid") {
    // density proportional to 1 on [0, 1]: trapezoid is exact for linear integrands
    const JumpDistribution tab(Tabulated{{0.0, 0.25, 0.5, 0.75, 1.0}, {1.0, 1.0, 1.0, 1.0, 1.0}});
    CHECK_THAT(expect(tab, [](double) { return 1.0; }), WithinAbs(1.0, 1e-12));
    CHECK_THAT(expect(tab, [](double y) { return y; }), WithinAbs(0.5, 1e-12));
    // y^2 on the 4-panel trapezoid gives 1/3 + h^2/6 with h = 1/4
    CHECK_THAT(expect(tab, [](double y) { return y * y; }), WithinAbs(1.0 / 3.0 + 1.0 / 96.0, 1e-12));
    CHECK(std::isfinite(mgf(tab, 100.0)));
}

TEST_CASE("invalid laws are rejected") {
    CHECK_THROWS_AS(JumpDistribution(ExponentialPositive{0.0}), InvalidModel);
    CHECK_THROWS_AS(JumpDistribution(ExponentialNegative{-1.0}), InvalidModel);
    CHECK_THROWS_AS(JumpDistribution(TwoPoint{0.0, 1.0, 1.5}), InvalidModel);
    CHECK_THROWS_AS(JumpDistribution(Tabulated{{0.0, 0.0}, {1.0, 1.0}}), InvalidModel);
    CHECK_THROWS_AS(JumpDistribution(Tabulated{{0.0, 1.0}, {-1.0, 3.0}}), InvalidModel);
}
