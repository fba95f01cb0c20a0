#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "jumpopt/errors.hpp"
#include "jumpopt/extended_real.hpp"
#include "jumpopt/format.hpp"

namespace jumpopt {

/// Closed portfolio constraint set K = [lower, upper]; infinite bounds allowed.
struct ConstraintSet {
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();

    static ConstraintSet real_line() { return {}; }
    static ConstraintSet no_short_selling() { return {0.0, std::numeric_limits<double>::infinity()}; }
    static ConstraintSet no_borrowing() { return {-std::numeric_limits<double>::infinity(), 1.0}; }

    bool bounded_below() const noexcept { return std::isfinite(lower); }
    bool bounded_above() const noexcept { return std::isfinite(upper); }
    bool contains(double pi) const noexcept { return pi >= lower && pi <= upper; }

    void validate() const {
        if (std::isnan(lower) || std::isnan(upper) || lower > 0.0 || upper < 0.0 ||
            lower == std::numeric_limits<double>::infinity() || upper == -std::numeric_limits<double>::infinity())
            throw InvalidModel("constraint set must be a closed interval containing 0, got [" +
                               format_double(lower) + ", " + format_double(upper) + "]");
    }

    std::string to_string() const { return "[" + format_double(lower) + ", " + format_double(upper) + "]"; }

    friend bool operator==(const ConstraintSet&, const ConstraintSet&) = default;
};

struct Frictionless {
    friend bool operator==(const Frictionless&, const Frictionless&) = default;
};

/// Borrowing at R, lending at the regime rate r: g = -(R - r)(pi - 1)^+.
struct DifferentialRates {
    double borrow_rate;
    friend bool operator==(const DifferentialRates&, const DifferentialRates&) = default;
};

/// Short positions pay the loan fee rL on the collateral: g = (r - rL) pi^-.
struct ShortRebate {
    double loan_rate;
    friend bool operator==(const ShortRebate&, const ShortRebate&) = default;
};

/// Concave piecewise-linear g with g(0) = 0. slopes[j] applies between
/// breakpoints[j-1] and breakpoints[j]; slopes.size() == breakpoints.size() + 1.
struct PiecewiseLinearConcave {
    std::vector<double> breakpoints;
    std::vector<double> slopes;
    friend bool operator==(const PiecewiseLinearConcave&, const PiecewiseLinearConcave&) = default;
};

using MarginModel = std::variant<Frictionless, DifferentialRates, ShortRebate, PiecewiseLinearConcave>;

inline std::string_view margin_name(const MarginModel& m) {
    static constexpr std::string_view names[] = {"frictionless", "differential_rates", "short_rebate",
                                                 "piecewise_linear"};
    return names[m.index()];
}

/// Validates the model against the regime's money-market rate r.
inline void validate_margin(const MarginModel& m, double r) {
    if (auto* d = std::get_if<DifferentialRates>(&m)) {
        if (!std::isfinite(d->borrow_rate) || d->borrow_rate < r)
            throw InvalidModel("borrowing rate R=" + format_double(d->borrow_rate) + " must be >= r=" +
                               format_double(r));
    } else if (auto* s = std::get_if<ShortRebate>(&m)) {
        if (!std::isfinite(s->loan_rate) || s->loan_rate < r)
            throw InvalidModel("stock loan rate rL=" + format_double(s->loan_rate) + " must be >= r=" +
                               format_double(r));
    } else if (auto* p = std::get_if<PiecewiseLinearConcave>(&m)) {
        if (p->slopes.size() != p->breakpoints.size() + 1)
            throw InvalidModel("piecewise-linear margin needs exactly one more slope than breakpoints");
        for (std::size_t j = 0; j < p->breakpoints.size(); ++j) {
            if (!std::isfinite(p->breakpoints[j]) || (j > 0 && !(p->breakpoints[j] > p->breakpoints[j - 1])))
                throw InvalidModel("piecewise-linear breakpoints must be finite and strictly increasing");
        }
        for (std::size_t j = 0; j < p->slopes.size(); ++j) {
            if (!std::isfinite(p->slopes[j])) throw InvalidModel("piecewise-linear slopes must be finite");
            if (j > 0 && p->slopes[j] > p->slopes[j - 1])
                throw InvalidModel("piecewise-linear margin is not concave: slope " + std::to_string(j) +
                                   " exceeds slope " + std::to_string(j - 1));
        }
    }
}

/// Every margin model in its breakpoint/slope form.
inline PiecewiseLinearConcave as_piecewise(const MarginModel& m, double r) {
    if (auto* d = std::get_if<DifferentialRates>(&m)) return {{1.0}, {0.0, -(d->borrow_rate - r)}};
    if (auto* s = std::get_if<ShortRebate>(&m)) return {{0.0}, {s->loan_rate - r, 0.0}};
    if (auto* p = std::get_if<PiecewiseLinearConcave>(&m)) return *p;
    return {{}, {0.0}};
}

namespace detail {

inline double piecewise_eval(const PiecewiseLinearConcave& p, double pi) {
    // integrate the slope from 0 to pi
    const auto& b = p.breakpoints;
    const auto& s = p.slopes;
    double g = 0.0;
    if (pi >= 0.0) {
        double x = 0.0;
        std::size_t j = static_cast<std::size_t>(std::upper_bound(b.begin(), b.end(), 0.0) - b.begin());
        while (j < b.size() && b[j] < pi) {
            g += s[j] * (b[j] - x);
            x = b[j];
            ++j;
        }
        g += s[j] * (pi - x);
    } else {
        double x = 0.0;
        std::size_t j = static_cast<std::size_t>(std::lower_bound(b.begin(), b.end(), 0.0) - b.begin());
        while (j > 0 && b[j - 1] > pi) {
            g -= s[j] * (x - b[j - 1]);
            x = b[j - 1];
            --j;
        }
        g -= s[j] * (x - pi);
    }
    return g;
}

}  // namespace detail

inline double margin_g(const MarginModel& m, double r, double pi) {
    if (auto* d = std::get_if<DifferentialRates>(&m)) return pi > 1.0 ? -(d->borrow_rate - r) * (pi - 1.0) : 0.0;
    if (auto* s = std::get_if<ShortRebate>(&m)) return pi < 0.0 ? (r - s->loan_rate) * (-pi) : 0.0;
    if (auto* p = std::get_if<PiecewiseLinearConcave>(&m)) return detail::piecewise_eval(*p, pi);
    return 0.0;
}

/// sup over pi in K of g(pi) - pi*zeta for a concave piecewise-linear g. The
/// supremum of a concave piecewise-linear function is attained at a breakpoint,
/// a finite endpoint of K, or is +inf when an outer slope keeps increasing.
inline ExtendedReal conjugate_piecewise(const PiecewiseLinearConcave& p, const ConstraintSet& K, double zeta) {
    if (!K.bounded_above() && p.slopes.back() - zeta > 0.0) return ExtendedReal::plus_infinity();
    if (!K.bounded_below() && p.slopes.front() - zeta < 0.0) return ExtendedReal::plus_infinity();
    auto value = [&](double pi) { return detail::piecewise_eval(p, pi) - pi * zeta; };
    double best = 0.0;  // pi = 0 is in K
    for (double b : p.breakpoints)
        if (K.contains(b)) best = std::max(best, value(b));
    if (K.bounded_below()) best = std::max(best, value(K.lower));
    if (K.bounded_above()) best = std::max(best, value(K.upper));
    return ExtendedReal::finite(best);
}

inline bool is_canonical_diffrates(const MarginModel& m, const ConstraintSet& K) {
    return std::holds_alternative<DifferentialRates>(m) && K == ConstraintSet::no_short_selling();
}

inline bool is_canonical_short(const MarginModel& m, const ConstraintSet& K) {
    return std::holds_alternative<ShortRebate>(m) && K == ConstraintSet::no_borrowing();
}

/// g~_K(zeta) = sup_{pi in K} g(pi) - pi*zeta, +inf outside the effective domain.
inline ExtendedReal conjugate_gk(const MarginModel& m, double r, const ConstraintSet& K, double zeta) {
    if (is_canonical_diffrates(m, K)) {
        const double spread = std::get<DifferentialRates>(m).borrow_rate - r;
        if (zeta >= 0.0) return ExtendedReal::finite(0.0);
        if (zeta >= -spread) return ExtendedReal::finite(-zeta);
        return ExtendedReal::plus_infinity();
    }
    if (is_canonical_short(m, K)) {
        const double spread = std::get<ShortRebate>(m).loan_rate - r;
        if (zeta <= 0.0) return ExtendedReal::finite(-zeta);
        if (zeta <= spread) return ExtendedReal::finite(0.0);
        return ExtendedReal::plus_infinity();
    }
    return conjugate_piecewise(as_piecewise(m, r), K, zeta);
}

/// {zeta : g~_K(zeta) < inf}; closed at every finite end.
inline Interval effective_domain(const MarginModel& m, double r, const ConstraintSet& K) {
    const auto p = as_piecewise(m, r);
    Interval dom = Interval::real_line();
    if (!K.bounded_above()) dom.lower = p.slopes.back();
    if (!K.bounded_below()) dom.upper = p.slopes.front();
    return dom;
}

}  // namespace jumpopt
