#include <cmath>
#include <limits>

#include <catch_amalgamated.hpp>

#include "fixtures.hpp"

using namespace jumpopt;
using Catch::Matchers::WithinAbs;

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

// Brute-force sup of g(pi) - pi*zeta over K intersected with [-10, 10] on a
// grid of step 1e-3 (integers, hence 0 and 1, are grid points).
double brute_conjugate(const MarginModel& m, double r, const ConstraintSet& K, double zeta) {
    const double lo = std::max(K.lower, -10.0), hi = std::min(K.upper, 10.0);
    double best = -inf;
    for (long k = std::lround(lo * 1000); k <= std::lround(hi * 1000); ++k) {
        const double pi = k / 1000.0;
        best = std::max(best, margin_g(m, r, pi) - pi * zeta);
    }
    return best;
}

}  // namespace

TEST_CASE("margin function values") {
    for (const MarginModel& m : {MarginModel(Frictionless{}), MarginModel(DifferentialRates{0.05}),
                                 MarginModel(ShortRebate{0.05}), MarginModel(PiecewiseLinearConcave{{-1.0, 2.0}, {0.3, 0.0, -0.1}})})
        CHECK(margin_g(m, 0.03, 0.0) == 0.0);
    CHECK_THAT(margin_g(DifferentialRates{0.05}, 0.045, 2.0), WithinAbs(-0.005, 1e-15));
    CHECK(margin_g(DifferentialRates{0.05}, 0.045, 0.5) == 0.0);
    CHECK_THAT(margin_g(ShortRebate{0.05}, 0.03, -1.0), WithinAbs(-0.02, 1e-15));
    CHECK(margin_g(ShortRebate{0.05}, 0.03, 0.7) == 0.0);
    CHECK_THAT(margin_g(PiecewiseLinearConcave{{-1.0, 2.0}, {0.3, 0.0, -0.1}}, 0.0, -2.0), WithinAbs(-0.3, 1e-15));
    CHECK_THAT(margin_g(PiecewiseLinearConcave{{-1.0, 2.0}, {0.3, 0.0, -0.1}}, 0.0, 3.0), WithinAbs(-0.1, 1e-15));
}

TEST_CASE("closed-form conjugates") {
    const auto K0 = ConstraintSet::no_short_selling();
    const auto K1 = ConstraintSet::no_borrowing();
    CHECK(conjugate_gk(DifferentialRates{0.05}, 0.045, K0, 0.002).value() == 0.0);
    CHECK_THAT(conjugate_gk(DifferentialRates{0.05}, 0.045, K0, -0.003).value(), WithinAbs(0.003, 1e-15));
    CHECK_FALSE(conjugate_gk(DifferentialRates{0.05}, 0.045, K0, -0.0051).is_finite());
    CHECK_FALSE(conjugate_gk(ShortRebate{0.05}, 0.03, K1, 0.03).is_finite());
    CHECK(conjugate_gk(ShortRebate{0.05}, 0.03, K1, 0.01).value() == 0.0);
    CHECK_THAT(conjugate_gk(ShortRebate{0.05}, 0.03, K1, -0.04).value(), WithinAbs(0.04, 1e-15));
}

TEST_CASE("effective domains") {
    auto d = effective_domain(DifferentialRates{0.05}, 0.045, ConstraintSet::no_short_selling());
    CHECK_THAT(*d.lower, WithinAbs(-0.005, 1e-15));
    CHECK(d.lower_closed);
    CHECK_FALSE(d.upper);
    d = effective_domain(ShortRebate{0.05}, 0.03, ConstraintSet::no_borrowing());
    CHECK_THAT(*d.upper, WithinAbs(0.02, 1e-15));
    CHECK(d.upper_closed);
    CHECK_FALSE(d.lower);
    d = effective_domain(Frictionless{}, 0.03, ConstraintSet{0.0, 1.0});
    CHECK_FALSE(d.lower);
    CHECK_FALSE(d.upper);
    for (double z : {-1e6, -1.0, 0.0, 1.0, 1e6}) CHECK(conjugate_gk(Frictionless{}, 0.03, ConstraintSet{0.0, 1.0}, z).is_finite());
}

TEST_CASE("closed forms match dense grid maximization at 100 interior points") {
    struct Case {
        MarginModel m;
        double r;
        ConstraintSet K;
        double zlo, zhi;
    };
    const Case cases[] = {
        {DifferentialRates{0.05}, 0.045, ConstraintSet::no_short_selling(), -0.005, 0.2},
        {ShortRebate{0.05}, 0.03, ConstraintSet::no_borrowing(), -0.2, 0.02},
        {PiecewiseLinearConcave{{-1.0, 2.0}, {0.3, 0.0, -0.1}}, 0.0, ConstraintSet::real_line(), -0.1, 0.3},
        {DifferentialRates{0.05}, 0.045, ConstraintSet{-0.5, 3.0}, -0.3, 0.3},
    };
    for (const auto& c : cases) {
        for (int k = 1; k <= 100; ++k) {
            const double z = c.zlo + (c.zhi - c.zlo) * k / 101.0;
            const auto g = conjugate_gk(c.m, c.r, c.K, z);
            REQUIRE(g.is_finite());
            INFO(margin_name(c.m) << " K=" << c.K.to_string() << " zeta=" << z);
            CHECK_THAT(g.value(), WithinAbs(brute_conjugate(c.m, c.r, c.K, z), 1e-9));
            CHECK(g.value() >= 0.0);
        }
    }
}

TEST_CASE("named models agree with their piecewise form") {
    const auto K0 = ConstraintSet::no_short_selling();
    const auto K1 = ConstraintSet::no_borrowing();
    for (int k = 0; k <= 200; ++k) {
        const double z = -0.1 + 0.2 * k / 200.0;
        const auto a = conjugate_gk(DifferentialRates{0.05}, 0.045, K0, z);
        const auto b = conjugate_piecewise(as_piecewise(DifferentialRates{0.05}, 0.045), K0, z);
        CHECK(a.is_finite() == b.is_finite());
        if (a.is_finite()) CHECK_THAT(a.value(), WithinAbs(b.value(), 1e-15));
        const auto c = conjugate_gk(ShortRebate{0.05}, 0.03, K1, z);
        const auto d = conjugate_piecewise(as_piecewise(ShortRebate{0.05}, 0.03), K1, z);
        CHECK(c.is_finite() == d.is_finite());
        if (c.is_finite()) CHECK_THAT(c.value(), WithinAbs(d.value(), 1e-15));
    }
}

TEST_CASE("Fenchel inequality on a 100x100 grid") {
    struct Case {
        MarginModel m;
        double r;
        ConstraintSet K;
        double plo, phi, zlo, zhi;
    };
    const Case cases[] = {
        {DifferentialRates{0.05}, 0.045, ConstraintSet::no_short_selling(), 0.0, 10.0, -0.005, 0.5},
        {ShortRebate{0.05}, 0.03, ConstraintSet::no_borrowing(), -10.0, 1.0, -0.5, 0.02},
    };
    for (const auto& c : cases)
        for (int i = 0; i < 100; ++i)
            for (int j = 0; j < 100; ++j) {
                const double pi = c.plo + (c.phi - c.plo) * i / 99.0;
                const double z = j == 99 ? c.zhi : c.zlo + (c.zhi - c.zlo) * j / 99.0;
                CHECK(margin_g(c.m, c.r, pi) <= conjugate_gk(c.m, c.r, c.K, z).value() + pi * z + 1e-15);
            }
}

TEST_CASE("invalid frictions are rejected") {
    CHECK_THROWS_AS(validate_margin(DifferentialRates{0.04}, 0.045), InvalidModel);
    CHECK_THROWS_AS(validate_margin(ShortRebate{0.02}, 0.03), InvalidModel);
    CHECK_THROWS_AS(validate_margin(PiecewiseLinearConcave{{0.0}, {0.0, 0.1}}, 0.0), InvalidModel);
    CHECK_THROWS_AS(validate_margin(PiecewiseLinearConcave{{0.0}, {0.0}}, 0.0), InvalidModel);
    CHECK_THROWS_AS((ConstraintSet{1.0, 2.0}.validate()), InvalidModel);
    CHECK_THROWS_AS((ConstraintSet{0.5, -0.5}.validate()), InvalidModel);
}
