#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "jumpopt/distribution.hpp"
#include "jumpopt/errors.hpp"
#include "jumpopt/extended_real.hpp"
#include "jumpopt/format.hpp"
#include "jumpopt/frictions.hpp"
#include "jumpopt/market.hpp"

namespace jumpopt {

/// CRRA utility: log (gamma = 0) or x^gamma/gamma with gamma in (0, 1).
class Utility {
public:
    static Utility log() { return Utility(0.0); }
    static Utility power(double gamma) {
        if (!(gamma > 0.0 && gamma < 1.0))
            throw InvalidModel("power utility needs gamma in (0, 1), got " + format_double(gamma));
        return Utility(gamma);
    }

    double gamma() const noexcept { return gamma_; }
    bool is_log() const noexcept { return gamma_ == 0.0; }

    double operator()(double x) const {
        if (is_log()) return std::log(x);
        return std::pow(x, gamma_) / gamma_;
    }

    friend bool operator==(const Utility&, const Utility&) = default;

private:
    explicit Utility(double g) : gamma_(g) {}
    double gamma_;
};

/// Coefficients entering h for one regime.
struct HParams {
    double mu;
    double lambda;
    JumpDistribution dist;
    JumpTransform transform = JumpTransform::exponential;
};

inline HParams h_params(const MarketModel& m, int regime) {
    const auto& p = m.regime(regime);
    return {p.mu, m.lambda(regime), p.dist, m.transform};
}

struct HOptions {
    /// Use m(1), m(gamma), m(gamma - 1) at pi = 0 and pi = 1 (exponential transform).
    bool closed_form = true;
    QuadratureOptions quadrature{};
};

inline void require_feasible(const HParams& p, double pi) {
    if (!feasible_portfolios(p.dist, p.transform).contains(pi))
        throw DomainError("portfolio weight " + format_double(pi) + " makes 1 + pi*f <= 0 on the support (feasible " +
                          feasible_portfolios(p.dist, p.transform).to_string() + ")");
}

inline void require_gamma(double gamma) {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw DomainError("gamma must lie in [0, 1), got " + format_double(gamma));
}

/// h(pi) = mu + lambda * int f / (1 + pi f)^(1 - gamma) F(dy).
inline double h_value(const HParams& p, double gamma, double pi, const HOptions& opt = {}) {
    require_gamma(gamma);
    if (p.lambda == 0.0) return p.mu;
    require_feasible(p, pi);
    if (opt.closed_form && p.transform == JumpTransform::exponential) {
        if (pi == 0.0) return p.mu + p.lambda * (mgf(p.dist, 1.0) - 1.0);
        if (pi == 1.0) return p.mu + p.lambda * (mgf(p.dist, gamma) - mgf(p.dist, gamma - 1.0));
    }
    auto integrand = [&](double y) {
        const double f = jump_f(p.transform, y);
        if (f == 0.0) return 0.0;
        return f / std::pow(growth_factor(p.transform, pi, y), 1.0 - gamma);
    };
    return p.mu + p.lambda * expect_with_error(p.dist, integrand, opt.quadrature).value;
}

/// h'(pi) = lambda (gamma - 1) int f^2 / (1 + pi f)^(2 - gamma) F(dy).
inline double h_derivative(const HParams& p, double gamma, double pi, const HOptions& opt = {}) {
    require_gamma(gamma);
    if (p.lambda == 0.0) return 0.0;
    require_feasible(p, pi);
    auto integrand = [&](double y) {
        const double f = jump_f(p.transform, y);
        if (f == 0.0) return 0.0;
        return f * f / std::pow(growth_factor(p.transform, pi, y), 2.0 - gamma);
    };
    return p.lambda * (gamma - 1.0) * expect_with_error(p.dist, integrand, opt.quadrature).value;
}

struct InverseOptions {
    double h_tolerance = 1e-12;
    double pi_tolerance = 1e-12;  // relative to max(1, |pi|)
    double guard = 18446744073709551616.0;  // 2^64
    int max_iterations = 2000;
};

namespace detail {

/// Next trial point when walking away from `from` in direction `dir`: doubles
/// the distance, but never leaves the feasible set (approaches an open end).
inline std::optional<double> step_out(double from, double dist, int dir, const Interval& feas, double guard) {
    double cand = from + dir * dist;
    if (std::abs(cand) > guard) return std::nullopt;
    const auto bound = dir > 0 ? feas.upper : feas.lower;
    if (bound && !feas.contains(cand)) {
        const bool closed = dir > 0 ? feas.upper_closed : feas.lower_closed;
        if (closed) {
            if (from == *bound) return std::nullopt;
            return *bound;
        }
        cand = 0.5 * (from + *bound);
        if (cand == from) return std::nullopt;
    }
    return cand;
}

}  // namespace detail

/// pi with h(pi) = target on the search interval [lo, hi] (either end may be
/// infinite), by bracket doubling from the finite end followed by bisection.
inline double h_inverse(const HParams& p, double gamma, double target, Interval search = Interval::real_line(),
                        const InverseOptions& io = {}, const HOptions& ho = {}) {
    require_gamma(gamma);
    const Interval feas = feasible_portfolios(p.dist, p.transform);
    auto h = [&](double pi) { return h_value(p, gamma, pi, ho); };
    auto clip = [&](std::optional<double> a, std::optional<double> b, bool upper) -> std::optional<double> {
        if (!a) return b;
        if (!b) return a;
        return upper ? std::min(*a, *b) : std::max(*a, *b);
    };
    Interval range = search;
    range.lower = clip(search.lower, feas.lower, false);
    range.upper = clip(search.upper, feas.upper, true);
    range.lower_closed = !(feas.lower && range.lower == feas.lower && !feas.lower_closed);
    range.upper_closed = !(feas.upper && range.upper == feas.upper && !feas.upper_closed);
    if (range.lower && range.upper && *range.lower > *range.upper)
        throw RangeError("empty search interval " + range.to_string(), std::nan(""), std::nan(""));

    // anchor at a point of the range, preferably a closed finite end
    double lo, hi;
    if (range.lower && range.lower_closed) {
        lo = hi = *range.lower;
    } else if (range.upper && range.upper_closed) {
        lo = hi = *range.upper;
    } else {
        lo = hi = range.contains(0.0) ? 0.0 : 0.5 * (*range.lower + *range.upper);
    }
    double hlo = h(lo), hhi = hlo;
    if (hlo == target) return lo;
    const double h_anchor = hlo;
    auto report = [&](double h_last) {
        const double a = std::min(h_anchor, h_last), b = std::max(h_anchor, h_last);
        std::ostringstream os;
        os << "target " << format_double(target) << " outside the attained h-range [" << format_double(a) << ", "
           << format_double(b) << "] on " << range.to_string();
        return RangeError(os.str(), a, b);
    };
    // h decreasing: target < h(anchor) means the root lies to the right
    const int dir = target < hlo ? 1 : -1;
    double dist = 1.0;
    for (;;) {
        const double from = dir > 0 ? hi : lo;
        auto next = detail::step_out(from, dist, dir, range, io.guard);
        if (!next) throw report(dir > 0 ? hhi : hlo);
        const double hn = h(*next);
        if (dir > 0) {
            lo = hi, hlo = hhi;
            hi = *next, hhi = hn;
            if (hhi <= target) break;
        } else {
            hi = lo, hhi = hlo;
            lo = *next, hlo = hn;
            if (hlo >= target) break;
        }
        dist *= 2.0;
    }
    if (hhi == target) return hi;
    if (hlo == target) return lo;
    for (int it = 0; it < io.max_iterations; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) return std::abs(hlo - target) <= std::abs(hhi - target) ? lo : hi;
        const double hm = h(mid);
        if (std::abs(hm - target) <= io.h_tolerance) return mid;
        if (hm > target) lo = mid, hlo = hm;
        else hi = mid, hhi = hm;
        if (hi - lo <= io.pi_tolerance * std::max(1.0, std::abs(mid))) return 0.5 * (lo + hi);
    }
    return 0.5 * (lo + hi);
}

/// Optimal weight for one regime with the dual value and the branch taken.
struct PortfolioChoice {
    double pi;
    double zeta;      // r - h(pi); exact r - target on inverse branches
    int case_label;   // 1..4 for the named models, 0 for the generic solver
    std::string branch;
    double h_at_pi;   // numerically evaluated h(pi)
};

inline std::string choice_summary(const PortfolioChoice& c) {
    std::ostringstream os;
    os << "pi=" << format_double(c.pi) << " case=" << c.case_label << " (" << c.branch
       << ") zeta=" << format_double(c.zeta);
    return os.str();
}

/// Differential borrowing/lending rates with K = [0, inf).
inline PortfolioChoice optimal_portfolio_diffrates(const HParams& p, double r, double R, double gamma,
                                                   const HOptions& ho = {}) {
    if (!(R > p.mu))
        throw InfeasibleModel("differential-rates optimum needs R > mu, got R=" + format_double(R) +
                              " mu=" + format_double(p.mu));
    if (!(R >= r)) throw InvalidModel("borrowing rate R must be >= r");
    const Interval feas = feasible_portfolios(p.dist, p.transform);
    if (feas.upper || !feas.contains(0.0))
        throw InfeasibleModel("differential-rates optimum needs 1 + pi*f > 0 for every pi >= 0; feasible set is " +
                              feas.to_string());
    const double h0 = h_value(p, gamma, 0.0, ho);
    const double h1 = h_value(p, gamma, 1.0, ho);
    const Interval search = Interval::at_least(0.0);
    if (h0 < r) return {0.0, r - h0, 1, "h(0) < r", h0};
    if (h1 <= r) {
        if (h0 == r) return {0.0, 0.0, 2, "h(1) <= r <= h(0), tie at h(0) = r", h0};
        const double pi = h_inverse(p, gamma, r, Interval::closed(0.0, 1.0), {}, ho);
        return {pi, 0.0, 2, "h(1) <= r < h(0), pi = h^-1(r)", h_value(p, gamma, pi, ho)};
    }
    if (h1 <= R) return {1.0, r - h1, 3, "r < h(1) <= R", h1};
    const double pi = h_inverse(p, gamma, R, search, {}, ho);
    return {pi, r - R, 4, "R < h(1), pi = h^-1(R)", h_value(p, gamma, pi, ho)};
}

/// Short selling with loan fee rL and K = (-inf, 1].
inline PortfolioChoice optimal_portfolio_short(const HParams& p, double r, double rL, double gamma,
                                               const HOptions& ho = {}) {
    const double a = 2.0 * r - rL;
    if (!(p.mu > a))
        throw InfeasibleModel("short-rebate optimum needs mu > 2r - rL, got mu=" + format_double(p.mu) +
                              " 2r - rL=" + format_double(a));
    if (!(rL >= r)) throw InvalidModel("loan rate rL must be >= r");
    const Interval feas = feasible_portfolios(p.dist, p.transform);
    if (feas.lower || !feas.contains(1.0))
        throw InfeasibleModel("short-rebate optimum needs 1 + pi*f > 0 for every pi <= 1; feasible set is " +
                              feas.to_string());
    const double h0 = h_value(p, gamma, 0.0, ho);
    const double h1 = h_value(p, gamma, 1.0, ho);
    if (h0 < a) {
        const double pi = h_inverse(p, gamma, a, Interval::at_most(0.0), {}, ho);
        return {pi, rL - r, 1, "h(0) < 2r - rL, pi = h^-1(2r - rL)", h_value(p, gamma, pi, ho)};
    }
    if (h0 < r) return {0.0, r - h0, 2, "2r - rL <= h(0) < r", h0};
    if (h1 < r) {
        if (h0 == r) return {0.0, 0.0, 3, "h(1) < r <= h(0), tie at h(0) = r", h0};
        const double pi = h_inverse(p, gamma, r, Interval::closed(0.0, 1.0), {}, ho);
        return {pi, 0.0, 3, "h(1) < r <= h(0), pi = h^-1(r)", h_value(p, gamma, pi, ho)};
    }
    return {1.0, r - h1, 4, "r <= h(1)", h1};
}

/// Generic solver: pi in K maximizing g(pi) - pi*zeta at zeta = r - h(pi).
/// With the slopes of g to the left and right of pi (+inf / -inf at the ends
/// of K), optimality reads s_right(pi) <= r - h(pi) <= s_left(pi). Both sides
/// are monotone in pi, so the pieces and kinks are scanned left to right.
inline PortfolioChoice optimal_portfolio_generic(const HParams& p, const MarginModel& margin, double r,
                                                 const ConstraintSet& K, double gamma, const HOptions& ho = {}) {
    K.validate();
    validate_margin(margin, r);
    const auto pw = as_piecewise(margin, r);
    const Interval feas = feasible_portfolios(p.dist, p.transform);
    constexpr double inf = std::numeric_limits<double>::infinity();

    // candidate points: finite ends of K and kinks inside K, ascending
    std::vector<double> pts;
    if (K.bounded_below()) pts.push_back(K.lower);
    for (double b : pw.breakpoints)
        if (b > K.lower && b < K.upper) pts.push_back(b);
    if (K.bounded_above()) pts.push_back(K.upper);

    auto slope_at = [&](double pi, bool right) {
        const auto& b = pw.breakpoints;
        const auto k = right ? std::upper_bound(b.begin(), b.end(), pi) - b.begin()
                             : std::lower_bound(b.begin(), b.end(), pi) - b.begin();
        return pw.slopes[static_cast<std::size_t>(k)];
    };
    auto h = [&](double pi) { return h_value(p, gamma, pi, ho); };

    // piece between consecutive candidates (or out to infinity)
    auto try_piece = [&](double a, double b) -> std::optional<PortfolioChoice> {
        const double mid = std::isinf(a) ? (std::isinf(b) ? 0.0 : b - 1.0) : (std::isinf(b) ? a + 1.0 : 0.5 * (a + b));
        const double s = slope_at(mid, true);
        const double target = r - s;
        Interval search;
        if (!std::isinf(a)) search.lower = a;
        if (!std::isinf(b)) search.upper = b;
        search.lower_closed = search.upper_closed = false;
        if (p.lambda == 0.0) {
            if (p.mu == target) return PortfolioChoice{std::isinf(a) ? (std::isinf(b) ? 0.0 : b) : a, s, 0,
                                                       "flat h equal to r - slope", p.mu};
            return std::nullopt;
        }
        try {
            Interval both = search;
            both.lower_closed = both.upper_closed = true;
            const double pi = h_inverse(p, gamma, target, both, {}, ho);
            if ((!std::isinf(a) && pi <= a) || (!std::isinf(b) && pi >= b)) return std::nullopt;
            return PortfolioChoice{pi, s, 0, "interior of a linear piece, h(pi) = r - slope", h(pi)};
        } catch (const RangeError&) {
            return std::nullopt;
        }
    };
    auto try_point = [&](double c) -> std::optional<PortfolioChoice> {
        if (!feas.contains(c)) return std::nullopt;
        const double sl = c <= K.lower ? inf : slope_at(c, false);
        const double sr = c >= K.upper ? -inf : slope_at(c, true);
        const double hc = h(c);
        const double z = r - hc;
        if (sr <= z && z <= sl) {
            std::string what = c == K.lower ? "lower end of K" : (c == K.upper ? "upper end of K" : "kink of g");
            return PortfolioChoice{c, z, 0, what, hc};
        }
        return std::nullopt;
    };

    double left = K.bounded_below() ? K.lower : -inf;
    std::size_t k = 0;
    if (K.bounded_below()) {
        if (auto c = try_point(pts[0])) return *c;
        k = 1;
    }
    for (; k <= pts.size(); ++k) {
        if (k == pts.size() && K.bounded_above()) break;
        const double right = k < pts.size() ? pts[k] : inf;
        if (right > left) {
            if (auto c = try_piece(left, right)) return *c;
        }
        if (k < pts.size()) {
            if (auto c = try_point(pts[k])) return *c;
            left = pts[k];
        }
    }
    std::ostringstream os;
    os << "no portfolio in K=" << K.to_string() << " satisfies the conjugacy condition (gamma=" << format_double(gamma)
       << ", r=" << format_double(r) << ", dual domain " << effective_domain(margin, r, K).to_string();
    try {
        os << ", h(0)=" << format_double(h(0.0));
    } catch (const Error&) {
    }
    os << ", h -> " << format_double(p.mu) << " in the limit)";
    throw InfeasibleModel(os.str());
}

/// Dispatches to the named case analysis when the model and K match the
/// canonical examples, otherwise to the generic solver.
inline PortfolioChoice optimal_portfolio(const MarketModel& m, int regime, double gamma, const HOptions& ho = {}) {
    const auto& rp = m.regime(regime);
    const HParams hp = h_params(m, regime);
    const Interval feas = feasible_portfolios(hp.dist, hp.transform);
    if (is_canonical_diffrates(rp.margin, m.K) && !feas.upper && feas.contains(0.0) && hp.lambda > 0.0)
        return optimal_portfolio_diffrates(hp, rp.r, std::get<DifferentialRates>(rp.margin).borrow_rate, gamma, ho);
    if (is_canonical_short(rp.margin, m.K) && !feas.lower && feas.contains(1.0) && hp.lambda > 0.0)
        return optimal_portfolio_short(hp, rp.r, std::get<ShortRebate>(rp.margin).loan_rate, gamma, ho);
    return optimal_portfolio_generic(hp, rp.margin, rp.r, m.K, gamma, ho);
}

/// |g(pi) - pi*zeta - g~_K(zeta)|; DomainError when zeta lies outside N.
inline double verify_conjugacy(const MarginModel& margin, double r, const ConstraintSet& K, double pi, double zeta) {
    const auto gk = conjugate_gk(margin, r, K, zeta);
    if (!gk.is_finite())
        throw DomainError("dual value " + format_double(zeta) + " lies outside the effective domain " +
                          effective_domain(margin, r, K).to_string());
    return std::abs(margin_g(margin, r, pi) - pi * zeta - gk.value());
}

/// phi(i, y) = (1 + pi_i f(y))^(gamma - 1) for per-regime constant weights.
struct PhiSpec {
    double gamma = 0.0;
    std::array<double, 2> pi{0.0, 0.0};

    double operator()(JumpTransform tr, int regime, double y) const {
        return std::pow(growth_factor(tr, pi[static_cast<std::size_t>(regime)], y), gamma - 1.0);
    }
};

struct Policy {
    Utility utility = Utility::log();
    std::array<PortfolioChoice, 2> choice;
    ConsumptionRule consumption = NoConsumption{};

    PortfolioRule portfolio() const { return PortfolioRule::per_regime(choice[0].pi, choice[1].pi); }
    PhiSpec phi() const { return {utility.gamma(), {choice[0].pi, choice[1].pi}}; }
    std::array<double, 2> zeta() const { return {choice[0].zeta, choice[1].zeta}; }
};

/// pi per regime and c_t = x V_t^{1,pi,0} / (T + 1).
inline Policy log_optimal_policy(const MarketModel& m, double x, double T, const HOptions& ho = {}) {
    m.validate();
    if (!(x > 0.0) || !(T > 0.0)) throw InvalidModel("initial wealth and horizon must be positive");
    Policy pol;
    for (int i = 0; i < 2; ++i) {
        try {
            pol.choice[static_cast<std::size_t>(i)] = optimal_portfolio(m, i, 0.0, ho);
        } catch (const InfeasibleModel& e) {
            throw InfeasibleModel("regime " + std::to_string(i) + ": " + e.what());
        }
    }
    pol.consumption = ProportionalConsumption{x / (T + 1.0)};
    return pol;
}

/// Power-utility optimum; consumption is not part of this problem.
inline Policy power_optimal_policy(const MarketModel& m, double gamma, const HOptions& ho = {}) {
    m.validate();
    Policy pol;
    pol.utility = Utility::power(gamma);
    for (int i = 0; i < 2; ++i) {
        try {
            pol.choice[static_cast<std::size_t>(i)] = optimal_portfolio(m, i, gamma, ho);
        } catch (const InfeasibleModel& e) {
            throw InfeasibleModel("regime " + std::to_string(i) + ": " + e.what());
        }
    }
    return pol;
}

inline Policy optimal_policy(const MarketModel& m, const Utility& u, double x, double T, const HOptions& ho = {}) {
    return u.is_log() ? log_optimal_policy(m, x, T, ho) : power_optimal_policy(m, u.gamma(), ho);
}

}  // namespace jumpopt
