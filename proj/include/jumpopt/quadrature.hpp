#pragma once

#include <cmath>
#include <limits>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "jumpopt/errors.hpp"

namespace jumpopt {

struct QuadratureResult {
    double value;
    double error;  // Kronrod-vs-Gauss estimate of the absolute error
};

struct QuadratureOptions {
    double abs_tolerance = 1e-10;
    double rel_tolerance = 1e-13;
    unsigned max_depth = 14;
};

/// Adaptive 61-point Gauss-Kronrod on [a, b]; either bound may be infinite.
/// Throws QuadratureError when neither the absolute tolerance nor the relative
/// tolerance (against the L1 norm of the integrand) is met.
template <class F>
QuadratureResult integrate(F&& f, double a, double b, const QuadratureOptions& opt = {}) {
    if (a == b) return {0.0, 0.0};
    double error = 0.0;
    double l1 = 0.0;
    const double value = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        f, a, b, opt.max_depth, opt.rel_tolerance, &error, &l1);
    if (!std::isfinite(value) || !std::isfinite(error)) {
        throw QuadratureError("quadrature produced a non-finite value (divergent integral?)",
                              std::numeric_limits<double>::infinity());
    }
    if (error > opt.abs_tolerance && error > 1e3 * opt.rel_tolerance * l1) {
        throw QuadratureError("adaptive quadrature did not converge", error);
    }
    return {value, error};
}

}  // namespace jumpopt
