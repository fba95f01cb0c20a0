#include <algorithm>
#include <cmath>
#include <vector>

#include <catch_amalgamated.hpp>

#include "fixtures.hpp"

using namespace jumpopt;
using Catch::Matchers::WithinAbs;

namespace {

std::array<JumpDistribution, 2> both(const JumpDistribution& d) { return {d, d}; }

}  // namespace

TEST_CASE("absorbing state produces no jumps") {
    const auto p = simulate_regime_chain({0.0, 3.0}, 0, 1.0, 42);
    CHECK(p.jump_count() == 0);
    CHECK(p.state_at(0.0) == 0);
    CHECK(p.state_at(1.0) == 0);
    const auto mp = simulate_marks(p, both(JumpDistribution(ExponentialPositive{10.0})), 42);
    CHECK(mp.size() == 0);
}

TEST_CASE("symmetric chain has Poisson(lambda T) jump counts") {
    const std::size_t n = 100000;
    double s = 0.0, s2 = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double c = static_cast<double>(simulate_regime_chain({1.0, 1.0}, 0, 5.0, 2024, k).jump_count());
        s += c;
        s2 += c * c;
    }
    const double mean = s / n;
    const double se = std::sqrt((s2 / n - mean * mean) / n);
    INFO("mean " << mean << " se " << se);
    CHECK(std::abs(mean - 5.0) <= 3.0 * se);
}

TEST_CASE("holding times are exponential (Kolmogorov-Smirnov at 1%)") {
    const std::size_t n = 10000;
    for (int start : {0, 1}) {
        const jumpopt::GeneratorMatrix q{2.0, 0.5};
        const double rate = q.rate(start);
        std::vector<double> h;
        h.reserve(n);
        for (std::size_t k = 0; k < n; ++k) {
            const auto p = simulate_regime_chain(q, start, 50.0, 7, k);
            REQUIRE(p.jump_count() > 0);
            h.push_back(p.jump_times.front());
        }
        std::sort(h.begin(), h.end());
        double d = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double F = -std::expm1(-rate * h[i]);
            d = std::max({d, F - double(i) / n, double(i + 1) / n - F});
        }
        INFO("start " << start << " D=" << d);
        CHECK(d < 1.628 / std::sqrt(double(n)));
    }
}

TEST_CASE("regimes alternate and state_at is right-continuous") {
    const auto p = simulate_regime_chain({1.0, 1.0}, 1, 20.0, 3, 0);
    REQUIRE(p.jump_count() > 2);
    for (std::size_t n = 0; n < p.jump_count(); ++n) {
        CHECK(p.state_before(n) == (n % 2 == 0 ? 1 : 0));
        CHECK(p.state_at(p.jump_times[n]) == (p.state_before(n) ^ 1));
    }
    CHECK(std::is_sorted(p.jump_times.begin(), p.jump_times.end()));
    CHECK(p.jump_times.back() <= 20.0);
}

TEST_CASE("seed determinism and stream independence") {
    const jumpopt::GeneratorMatrix q{1.3, 0.7};
    const auto a = simulate_regime_chain(q, 0, 10.0, 99, 17);
    const auto b = simulate_regime_chain(q, 0, 10.0, 99, 17);
    CHECK(a.jump_times == b.jump_times);
    const auto c = simulate_regime_chain(q, 0, 10.0, 99, 18);
    CHECK(a.jump_times != c.jump_times);
    const auto dists = std::array<JumpDistribution, 2>{JumpDistribution(ExponentialPositive{10.0}),
                                                       JumpDistribution(ExponentialNegative{5.0})};
    const auto ma = simulate_marks(a, dists, 99, 17);
    const auto mb = simulate_marks(b, dists, 99, 17);
    CHECK(ma.marks == mb.marks);
    // marks from state 0 are positive, from state 1 negative
    for (std::size_t n = 0; n < ma.size(); ++n) CHECK((ma.regime.state_before(n) == 0) == (ma.marks[n] >= 0.0));
    // the chain stream does not depend on the mark laws
    const auto other = simulate_marks(a, both(JumpDistribution(TwoPoint{0.1, 0.1, 1.0})), 99, 17);
    CHECK(other.regime.jump_times == a.jump_times);
}

TEST_CASE("degenerate mark law") {
    const auto p = simulate_regime_chain({2.0, 2.0}, 0, 5.0, 11);
    const auto mp = simulate_marks(p, both(JumpDistribution(TwoPoint{0.1, 0.1, 1.0})), 11);
    REQUIRE(mp.size() == p.jump_count());
    for (double y : mp.marks) CHECK(y == 0.1);
}

TEST_CASE("exponential marks have mean 1/rate") {
    // keep only marks drawn in state 0
    const std::array<JumpDistribution, 2> dists{JumpDistribution(ExponentialPositive{10.0}),
                                                JumpDistribution(ExponentialPositive{1.0})};
    std::vector<double> ys;
    for (std::size_t k = 0; ys.size() < 100000; ++k) {
        const auto mp = simulate_marks(simulate_regime_chain({1.0, 1.0}, 0, 50.0, 5, k), dists, 5, k);
        for (std::size_t n = 0; n < mp.size() && ys.size() < 100000; ++n)
            if (mp.regime.state_before(n) == 0) ys.push_back(mp.marks[n]);
    }
    double s = 0.0, s2 = 0.0;
    for (double y : ys) s += y, s2 += y * y;
    const double m = s / ys.size();
    const double se = std::sqrt((s2 / ys.size() - m * m) / ys.size());
    INFO("mean " << m << " se " << se);
    CHECK(std::abs(m - 0.1) <= 3.0 * se);
}

TEST_CASE("generator validation") {
    CHECK_THROWS_AS(simulate_regime_chain({-1.0, 1.0}, 0, 1.0, 1), InvalidModel);
    CHECK_THROWS_AS(simulate_regime_chain({1.0, 1.0}, 2, 1.0, 1), InvalidModel);
    CHECK_THROWS_AS(simulate_regime_chain({1.0, 1.0}, 0, -1.0, 1), InvalidModel);
}
