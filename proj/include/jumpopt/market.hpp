#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "jumpopt/chain.hpp"
#include "jumpopt/distribution.hpp"
#include "jumpopt/errors.hpp"
#include "jumpopt/format.hpp"
#include "jumpopt/frictions.hpp"
#include "jumpopt/quadrature.hpp"

namespace jumpopt {

/// How a mark y moves the stock: exponential f = e^y - 1, identity f = y.
enum class JumpTransform { exponential, identity };

inline double jump_f(JumpTransform tr, double y) { return tr == JumpTransform::exponential ? std::expm1(y) : y; }

/// 1 + f(y), computed without the cancellation of 1 + expm1(y).
inline double one_plus_f(JumpTransform tr, double y) { return tr == JumpTransform::exponential ? std::exp(y) : 1.0 + y; }

/// 1 + pi*f(y). For pi in (0, 1] this is the convex combination
/// (1 - pi) + pi*(1 + f), which stays accurate when 1 + f underflows.
inline double growth_factor(JumpTransform tr, double pi, double y) {
    if (pi > 0.0 && pi <= 1.0) return (1.0 - pi) + pi * one_plus_f(tr, y);
    return 1.0 + pi * jump_f(tr, y);
}

/// Range of f over the support of a mark law; `*_attained` tells whether the
/// extreme value is taken by some mark.
struct JumpRange {
    double lo;
    double hi;
    bool lo_attained;
    bool hi_attained;
};

inline JumpRange jump_range(const JumpDistribution& d, JumpTransform tr) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (std::holds_alternative<ExponentialPositive>(d.law())) return {jump_f(tr, 0.0), inf, true, false};
    if (std::holds_alternative<ExponentialNegative>(d.law()))
        return {tr == JumpTransform::exponential ? -1.0 : -inf, jump_f(tr, 0.0), false, true};
    return {jump_f(tr, d.atoms().front().first), jump_f(tr, d.atoms().back().first), true, true};
}

/// Portfolio weights pi with 1 + pi*f > 0 on the whole support.
inline Interval feasible_portfolios(const JumpDistribution& d, JumpTransform tr) {
    const auto jr = jump_range(d, tr);
    Interval out = Interval::real_line();
    // pi > 0 needs 1 + pi*lo > 0, pi < 0 needs 1 + pi*hi > 0
    if (jr.lo < 0.0) {
        out.upper = std::isinf(jr.lo) ? 0.0 : -1.0 / jr.lo;
        out.upper_closed = std::isinf(jr.lo) || !jr.lo_attained;
    }
    if (jr.hi > 0.0) {
        out.lower = std::isinf(jr.hi) ? 0.0 : -1.0 / jr.hi;
        out.lower_closed = std::isinf(jr.hi) || !jr.hi_attained;
    }
    return out;
}

struct RegimeParams {
    double r = 0.0;
    double mu = 0.0;
    MarginModel margin = Frictionless{};
    JumpDistribution dist = JumpDistribution(TwoPoint{0.0, 0.0, 1.0});

    friend bool operator==(const RegimeParams&, const RegimeParams&) = default;
};

/// Two-regime market: chain generator, per-regime coefficients, transform, K.
struct MarketModel {
    GeneratorMatrix generator;
    std::array<RegimeParams, 2> regimes;
    JumpTransform transform = JumpTransform::exponential;
    ConstraintSet K;

    double lambda(int i) const noexcept { return generator.rate(i); }
    const RegimeParams& regime(int i) const { return regimes[static_cast<std::size_t>(i)]; }
    std::array<JumpDistribution, 2> dists() const { return {regimes[0].dist, regimes[1].dist}; }

    void validate() const {
        generator.validate();
        K.validate();
        for (int i = 0; i < 2; ++i) {
            const auto& p = regime(i);
            const std::string tag = "regime " + std::to_string(i) + ": ";
            if (!std::isfinite(p.r) || !std::isfinite(p.mu)) throw InvalidModel(tag + "r and mu must be finite");
            try {
                validate_margin(p.margin, p.r);
            } catch (const InvalidModel& e) {
                throw InvalidModel(tag + e.what());
            }
            const auto jr = jump_range(p.dist, transform);
            if (jr.lo < -1.0 || (jr.lo == -1.0 && jr.lo_attained))
                throw InvalidModel(tag + "jump transform gives f <= -1 on the support of the " +
                                   std::string(p.dist.name()) + " mark law");
        }
    }

    friend bool operator==(const MarketModel&, const MarketModel&) = default;
};

/// Single-regime market: both chain states carry the same coefficients, so
/// jump times form a Poisson process with intensity lambda.
inline MarketModel single_regime_model(double lambda, const RegimeParams& p, const ConstraintSet& K,
                                       JumpTransform tr = JumpTransform::exponential) {
    return MarketModel{{lambda, lambda}, {p, p}, tr, K};
}

/// Per-regime constants, or a deterministic step function of t when
/// step_times is non-empty: step_values[k] applies on [step_times[k-1], step_times[k]).
struct PortfolioRule {
    std::array<double, 2> by_regime{0.0, 0.0};
    std::vector<double> step_times;
    std::vector<double> step_values;

    static PortfolioRule constant(double pi) { return {{pi, pi}, {}, {}}; }
    static PortfolioRule per_regime(double pi0, double pi1) { return {{pi0, pi1}, {}, {}}; }
    static PortfolioRule steps(std::vector<double> times, std::vector<double> values) {
        PortfolioRule p{{0.0, 0.0}, std::move(times), std::move(values)};
        p.validate();
        return p;
    }

    bool is_step() const noexcept { return !step_times.empty(); }

    void validate() const {
        if (!is_step()) return;
        if (step_values.size() != step_times.size() + 1)
            throw InvalidModel("step portfolio needs one more value than step times");
        for (std::size_t k = 1; k < step_times.size(); ++k)
            if (!(step_times[k] > step_times[k - 1])) throw InvalidModel("step times must be strictly increasing");
    }

    /// Weight on [t, next breakpoint) in regime i.
    double at(double t, int regime) const {
        if (!is_step()) return by_regime[static_cast<std::size_t>(regime)];
        const auto k = std::upper_bound(step_times.begin(), step_times.end(), t) - step_times.begin();
        return step_values[static_cast<std::size_t>(k)];
    }

    /// Predictable weight applied to a jump at t: the left limit.
    double before(double t, int regime) const {
        if (!is_step()) return by_regime[static_cast<std::size_t>(regime)];
        const auto k = std::lower_bound(step_times.begin(), step_times.end(), t) - step_times.begin();
        return step_values[static_cast<std::size_t>(k)];
    }
};

struct NoConsumption {};
/// c_t = scale * V_t^{1,pi,0}; the log-optimal rule has scale x/(T+1).
struct ProportionalConsumption {
    double scale;
};
struct ConstantConsumption {
    double rate;
};
struct DeterministicConsumption {
    std::function<double(double)> rate;
};

using ConsumptionRule =
    std::variant<NoConsumption, ProportionalConsumption, ConstantConsumption, DeterministicConsumption>;

/// Right-continuous path whose logarithm is linear between knots and jumps at
/// knots. Segment k covers [knots[k], knots[k+1]) with log value
/// log_start[k] + slope[k]*(t - knots[k]).
class LogLinearPath {
public:
    LogLinearPath() = default;
    explicit LogLinearPath(double log_initial) : pending_(log_initial) {}

    /// Appends a segment from the current end to t1, then a jump of size
    /// log_jump at t1 (which belongs to the next segment).
    void extend(double t0, double t1, double slope, int regime, double log_jump = 0.0) {
        knots_.push_back(t0);
        log_start_.push_back(pending_);
        slope_.push_back(slope);
        regime_.push_back(regime);
        pending_ = pending_ + slope * (t1 - t0) + log_jump;
        end_ = t1;
        end_jump_ = log_jump;
    }

    std::size_t segments() const noexcept { return knots_.size(); }
    double knot(std::size_t k) const { return knots_[k]; }
    double segment_end(std::size_t k) const { return k + 1 < knots_.size() ? knots_[k + 1] : end_; }
    double log_start(std::size_t k) const { return log_start_[k]; }
    double slope(std::size_t k) const { return slope_[k]; }
    int regime(std::size_t k) const { return regime_[k]; }
    double end_time() const noexcept { return end_; }

    /// Log value at the terminal time, including a jump exactly at T.
    double log_terminal() const noexcept { return pending_; }

    double log_at(double t) const {
        if (t >= end_) return pending_;
        const auto k = segment_index(t);
        return log_start_[k] + slope_[k] * (t - knots_[k]);
    }
    double at(double t) const { return std::exp(log_at(t)); }

    /// Left limit at t > 0.
    double log_left(double t) const {
        if (t >= end_) return pending_ - end_jump_;
        const auto k = segment_index(t);
        if (t == knots_[k] && k > 0) return log_start_[k - 1] + slope_[k - 1] * (t - knots_[k - 1]);
        return log_start_[k] + slope_[k] * (t - knots_[k]);
    }

    std::size_t segment_index(double t) const {
        auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
        return it == knots_.begin() ? 0 : static_cast<std::size_t>(it - knots_.begin()) - 1;
    }

private:
    std::vector<double> knots_;
    std::vector<double> log_start_;
    std::vector<double> slope_;
    std::vector<int> regime_;
    double pending_ = 0.0;
    double end_ = 0.0;
    double end_jump_ = 0.0;
};

/// One piece of the event timeline of a path: [t0, t1) in a fixed regime
/// with a fixed portfolio weight, optionally ending at mark `mark`.
struct TimelineSegment {
    double t0;
    double t1;
    int regime;
    std::optional<std::size_t> mark;
};

/// Splits [0, T] at jump times and at the extra breakpoints (sorted).
inline std::vector<TimelineSegment> timeline(const MarkedPointPath& path, const std::vector<double>& extra = {}) {
    std::vector<TimelineSegment> out;
    const double T = path.horizon();
    double t = 0.0;
    std::size_t n = 0;
    std::size_t e = 0;
    while (e < extra.size() && extra[e] <= 0.0) ++e;
    for (;;) {
        const double next_jump = n < path.size() ? path.regime.jump_times[n] : T;
        const double next_extra = e < extra.size() ? extra[e] : T;
        const double t1 = std::min({next_jump, next_extra, T});
        const bool is_jump = n < path.size() && next_jump == t1;
        out.push_back({t, t1, path.regime.state_after(n), is_jump ? std::optional<std::size_t>(n) : std::nullopt});
        if (is_jump) ++n;
        while (e < extra.size() && extra[e] <= t1) ++e;
        t = t1;
        if (t >= T && n >= path.size()) break;
    }
    return out;
}

/// S_t = s0 * exp(int mu) * prod(1 + f(Y_n)).
inline LogLinearPath stock_path(const MarketModel& model, const MarkedPointPath& path, double s0) {
    if (!(s0 > 0.0)) throw InvalidModel("initial stock price must be positive, got " + format_double(s0));
    LogLinearPath out(std::log(s0));
    for (const auto& seg : timeline(path)) {
        double jump = 0.0;
        if (seg.mark) {
            const double g = one_plus_f(model.transform, path.marks[*seg.mark]);
            if (!(g > 0.0))
                throw InvalidModel("1 + f(y) <= 0 at mark " + std::to_string(*seg.mark) + " (y=" +
                                   format_double(path.marks[*seg.mark]) + ")");
            jump = std::log(g);
        }
        out.extend(seg.t0, seg.t1, model.regime(seg.regime).mu, seg.regime, jump);
    }
    return out;
}

/// Drift of log V^{1,pi,0} in regime i at weight pi.
inline double wealth_drift(const RegimeParams& p, double pi) {
    return p.r + margin_g(p.margin, p.r, pi) + pi * (p.mu - p.r);
}

/// V^{1,pi,0}: exp(int [r + g(pi) + pi(mu - r)]) * prod(1 + pi f(Y_n)).
inline LogLinearPath gross_wealth_path(const MarketModel& model, const PortfolioRule& pi,
                                       const MarkedPointPath& path) {
    LogLinearPath out(0.0);
    for (const auto& seg : timeline(path, pi.step_times)) {
        const auto& p = model.regime(seg.regime);
        double jump = 0.0;
        if (seg.mark) {
            const double w = pi.before(seg.t1, seg.regime);
            const double y = path.marks[*seg.mark];
            const double g = growth_factor(model.transform, w, y);
            if (!(g > 0.0))
                throw BankruptcyError("1 + pi*f(y) = " + format_double(g) + " <= 0 at mark " +
                                          std::to_string(*seg.mark) + " (t=" + format_double(seg.t1) +
                                          ", y=" + format_double(y) + ", pi=" + format_double(w) + ")",
                                      *seg.mark, seg.t1);
            jump = std::log(g);
        }
        out.extend(seg.t0, seg.t1, wealth_drift(p, pi.at(seg.t0, seg.regime)), seg.regime, jump);
    }
    return out;
}

/// int_{t0}^{t1} exp(a + b (s - t0)) ds.
inline double integrate_exp_linear(double a, double b, double t0, double t1) {
    const double dt = t1 - t0;
    if (dt <= 0.0) return 0.0;
    const double bd = b * dt;
    if (std::abs(bd) < 1e-300) return std::exp(a) * dt;
    return std::exp(a) * std::expm1(bd) / b;
}

/// The wealth path V = xi * V^{1,pi,0} with xi_t = x - int_0^t c/V^{1,pi,0}.
/// xi is tracked per segment of V^{1,pi,0} so that evaluation at any t is
/// closed-form and independent of the reporting grid.
class WealthPath {
public:
    WealthPath(double x, LogLinearPath gross, ConsumptionRule c, double horizon)
        : x_(x), gross_(std::move(gross)), c_(std::move(c)), horizon_(horizon) {
        cumulative_.reserve(gross_.segments() + 1);
        cumulative_.push_back(0.0);
        for (std::size_t k = 0; k < gross_.segments(); ++k)
            cumulative_.push_back(cumulative_.back() + consumed(k, gross_.knot(k), gross_.segment_end(k)));
        if (x_ - cumulative_.back() <= 0.0) ruin_time_ = locate_ruin();
    }

    double initial_wealth() const noexcept { return x_; }
    double horizon() const noexcept { return horizon_; }
    const LogLinearPath& gross() const noexcept { return gross_; }
    const ConsumptionRule& consumption() const noexcept { return c_; }

    bool ruined() const noexcept { return ruin_time_.has_value(); }
    std::optional<double> ruin_time() const noexcept { return ruin_time_; }

    double gross_at(double t) const { return gross_.at(t); }

    double xi_at(double t) const {
        if (t >= horizon_) return x_ - cumulative_.back();
        const auto k = gross_.segment_index(t);
        return x_ - cumulative_[k] - consumed(k, gross_.knot(k), t);
    }

    double value_at(double t) const { return xi_at(t) * gross_at(t); }

    /// Consumption rate c_t.
    double consumption_at(double t) const {
        if (auto* p = std::get_if<ProportionalConsumption>(&c_)) return p->scale * gross_at(t);
        if (auto* p = std::get_if<ConstantConsumption>(&c_)) return p->rate;
        if (auto* p = std::get_if<DeterministicConsumption>(&c_)) return p->rate(t);
        return 0.0;
    }

    /// int_{knot k}^{t} c_s / V_s^{1,pi,0} ds inside segment k.
    double consumed(std::size_t k, double t0, double t) const {
        if (t <= t0) return 0.0;
        if (auto* p = std::get_if<ProportionalConsumption>(&c_)) return p->scale * (t - t0);
        const double a = -(gross_.log_start(k) + gross_.slope(k) * (t0 - gross_.knot(k)));
        const double b = -gross_.slope(k);
        if (auto* p = std::get_if<ConstantConsumption>(&c_)) return p->rate * integrate_exp_linear(a, b, t0, t);
        if (auto* p = std::get_if<DeterministicConsumption>(&c_)) {
            auto f = [&](double s) { return p->rate(s) * std::exp(a + b * (s - t0)); };
            return integrate(f, t0, t, QuadratureOptions{1e-10, 1e-13, 14}).value;
        }
        return 0.0;
    }

private:
    double locate_ruin() const {
        std::size_t k = 0;
        while (x_ - cumulative_[k + 1] > 0.0) ++k;
        double lo = gross_.knot(k);
        double hi = gross_.segment_end(k);
        for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
            const double mid = 0.5 * (lo + hi);
            if (x_ - cumulative_[k] - consumed(k, gross_.knot(k), mid) > 0.0) lo = mid;
            else hi = mid;
        }
        return hi;
    }

    double x_;
    LogLinearPath gross_;
    ConsumptionRule c_;
    double horizon_;
    std::vector<double> cumulative_;
    std::optional<double> ruin_time_;
};

inline void validate_consumption(const ConsumptionRule& c) {
    if (auto* p = std::get_if<ProportionalConsumption>(&c); p && !(p->scale >= 0.0))
        throw InvalidModel("proportional consumption scale must be >= 0");
    if (auto* p = std::get_if<ConstantConsumption>(&c); p && !(p->rate >= 0.0))
        throw InvalidModel("constant consumption rate must be >= 0");
}

/// V^{x,pi,c}. Throws RuinError when xi reaches 0 on [0, T] unless
/// `allow_ruin` is set, in which case the returned path reports ruin_time().
inline WealthPath wealth_path(double x, const MarketModel& model, const PortfolioRule& pi, const ConsumptionRule& c,
                              const MarkedPointPath& path, bool allow_ruin = false) {
    if (!(x > 0.0)) throw InvalidModel("initial wealth must be positive, got " + format_double(x));
    validate_consumption(c);
    WealthPath w(x, gross_wealth_path(model, pi, path), c, path.horizon());
    if (w.ruined() && !allow_ruin)
        throw RuinError("consumption exhausts wealth at t=" + format_double(*w.ruin_time()) +
                            " before the horizon; pair is inadmissible",
                        *w.ruin_time());
    return w;
}

/// Jump times together with a uniform grid of `points` (>= 2) points on [0, T].
inline std::vector<double> report_grid(const MarkedPointPath& path, std::size_t points = 256) {
    const double T = path.horizon();
    std::vector<double> grid;
    grid.reserve(points + path.size());
    for (std::size_t k = 0; k < points; ++k)
        grid.push_back(k + 1 == points ? T : T * static_cast<double>(k) / static_cast<double>(points - 1));
    grid.insert(grid.end(), path.regime.jump_times.begin(), path.regime.jump_times.end());
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    return grid;
}

/// CSV rows t,regime,S,V1pi0,xi,V on the report grid.
inline void write_path_csv(std::ostream& os, const MarkedPointPath& path, const LogLinearPath& stock,
                           const WealthPath& wealth, std::size_t points = 256) {
    os << "t,regime,S,V1pi0,xi,V\n";
    for (double t : report_grid(path, points)) {
        os << format_double(t) << ',' << path.regime.state_at(t) << ',' << format_double(stock.at(t)) << ','
           << format_double(wealth.gross_at(t)) << ',' << format_double(wealth.xi_at(t)) << ','
           << format_double(wealth.value_at(t)) << '\n';
    }
}

}  // namespace jumpopt
