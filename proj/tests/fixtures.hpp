#pragma once

#include <cmath>
#include <functional>

#include "jumpopt/jumpopt.hpp"

namespace fx {

using namespace jumpopt;

// Fig. 1: mu=-0.05, lambda=1, r=0.045, R=0.05, Exp+(10), K=[0, inf).
inline RegimeParams fig1_params() { return {0.045, -0.05, DifferentialRates{0.05}, JumpDistribution(ExponentialPositive{10.0})}; }
inline MarketModel fig1_model() { return single_regime_model(1.0, fig1_params(), ConstraintSet::no_short_selling()); }

// Fig. 3: mu=0.07, lambda=1, r=0.03, rL=0.05, Exp-(10), K=(-inf, 1].
inline RegimeParams fig3_params() { return {0.03, 0.07, ShortRebate{0.05}, JumpDistribution(ExponentialNegative{10.0})}; }
inline MarketModel fig3_model() { return single_regime_model(1.0, fig3_params(), ConstraintSet::no_borrowing()); }

inline HParams hp(const RegimeParams& p, double lambda = 1.0) { return {p.mu, lambda, p.dist, JumpTransform::exponential}; }

// Composite Simpson on [a, b] with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 200000) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int k = 1; k < n; ++k) s += (k % 2 ? 4.0 : 2.0) * f(a + k * h);
    return s * h / 3.0;
}

// E[g(Y)] for Y ~ Exp(rate) on the positive (sign=+1) or negative (sign=-1)
// half-line, truncated where the weight is below 1e-300.
inline double exp_expect(double rate, double sign, const std::function<double(double)>& g, int n = 200000) {
    const double ymax = 60.0 / rate;
    return simpson([&](double u) { return g(sign * u) * rate * std::exp(-rate * u); }, 0.0, ymax, n);
}

}  // namespace fx
