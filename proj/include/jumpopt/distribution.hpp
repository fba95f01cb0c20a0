#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "jumpopt/errors.hpp"
#include "jumpopt/extended_real.hpp"
#include "jumpopt/format.hpp"
#include "jumpopt/quadrature.hpp"
#include "jumpopt/rng.hpp"

namespace jumpopt {

/// Y ~ Exponential(rate) on [0, inf).
struct ExponentialPositive {
    double rate;
    friend bool operator==(const ExponentialPositive&, const ExponentialPositive&) = default;
};

/// -Y ~ Exponential(rate), i.e. density rate*exp(rate*y) on (-inf, 0].
struct ExponentialNegative {
    double rate;
    friend bool operator==(const ExponentialNegative&, const ExponentialNegative&) = default;
};

/// Y = y_hi with probability p_hi, y_lo otherwise.
struct TwoPoint {
    double y_lo;
    double y_hi;
    double p_hi;
    friend bool operator==(const TwoPoint&, const TwoPoint&) = default;
};

/// Density values on a strictly increasing grid. Integrals against it use the
/// trapezoid rule on that grid and nothing else, which is the same as treating
/// the law as atoms at the grid points with trapezoid weights.
struct Tabulated {
    std::vector<double> y;
    std::vector<double> density;
    friend bool operator==(const Tabulated&, const Tabulated&) = default;
};

/// Mark law F_i(dy) of one regime.
class JumpDistribution {
public:
    using Variant = std::variant<ExponentialPositive, ExponentialNegative, TwoPoint, Tabulated>;

    JumpDistribution(ExponentialPositive d) : law_(d) { validate(); }
    JumpDistribution(ExponentialNegative d) : law_(d) { validate(); }
    JumpDistribution(TwoPoint d) : law_(d) { validate(); }
    JumpDistribution(Tabulated d) : law_(std::move(d)) { validate(); }

    const Variant& law() const noexcept { return law_; }

    std::string_view name() const noexcept {
        static constexpr std::string_view names[] = {"exponential_positive", "exponential_negative",
                                                     "two_point", "tabulated"};
        return names[law_.index()];
    }

    bool has_atoms() const noexcept { return !atoms_.empty(); }

    /// (y, probability) pairs with positive probability; empty for the
    /// absolutely continuous variants.
    const std::vector<std::pair<double, double>>& atoms() const noexcept { return atoms_; }

    /// Closed hull of the support; `*_closed` tells whether the endpoint is
    /// attained by the law.
    Interval support() const {
        if (std::holds_alternative<ExponentialPositive>(law_)) return Interval::at_least(0.0);
        if (std::holds_alternative<ExponentialNegative>(law_)) return Interval::at_most(0.0);
        return Interval::closed(atoms_.front().first, atoms_.back().first);
    }

    /// True when E[exp(sY)] is finite.
    bool in_mgf_domain(double s) const noexcept {
        if (auto* e = std::get_if<ExponentialPositive>(&law_)) return s < e->rate;
        if (auto* e = std::get_if<ExponentialNegative>(&law_)) return s > -e->rate;
        return std::isfinite(s);
    }

    double mean() const {
        if (auto* e = std::get_if<ExponentialPositive>(&law_)) return 1.0 / e->rate;
        if (auto* e = std::get_if<ExponentialNegative>(&law_)) return -1.0 / e->rate;
        double m = 0.0;
        for (auto [y, p] : atoms_) m += p * y;
        return m;
    }

    /// One draw; consumes exactly one uniform from `rng` for every variant.
    double sample(CounterRng& rng) const {
        const double u = rng.uniform();
        if (auto* e = std::get_if<ExponentialPositive>(&law_)) return -std::log(u) / e->rate;
        if (auto* e = std::get_if<ExponentialNegative>(&law_)) return std::log(u) / e->rate;
        auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
        const auto k = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()),
                                             atoms_.size() - 1);
        return atoms_[k].first;
    }

    friend bool operator==(const JumpDistribution& a, const JumpDistribution& b) {
        return a.law_ == b.law_;
    }

private:
    void validate() {
        std::visit([this](const auto& d) { check(d); }, law_);
        if (!atoms_.empty()) {
            cumulative_.resize(atoms_.size());
            double c = 0.0;
            for (std::size_t k = 0; k < atoms_.size(); ++k) {
                c += atoms_[k].second;
                cumulative_[k] = c;
            }
        }
    }

    static void check_rate(double rate) {
        if (!(rate > 0.0) || !std::isfinite(rate))
            throw InvalidModel("exponential mark law needs a positive finite rate, got " +
                               format_double(rate));
    }
    void check(const ExponentialPositive& d) { check_rate(d.rate); }
    void check(const ExponentialNegative& d) { check_rate(d.rate); }

    void check(const TwoPoint& d) {
        if (!std::isfinite(d.y_lo) || !std::isfinite(d.y_hi) || d.y_lo > d.y_hi)
            throw InvalidModel("two-point mark law needs finite y_lo <= y_hi");
        if (!(d.p_hi >= 0.0 && d.p_hi <= 1.0))
            throw InvalidModel("two-point mark law needs p_hi in [0, 1], got " + format_double(d.p_hi));
        if (d.y_lo == d.y_hi || d.p_hi == 1.0) {
            atoms_ = {{d.y_hi, 1.0}};
        } else if (d.p_hi == 0.0) {
            atoms_ = {{d.y_lo, 1.0}};
        } else {
            atoms_ = {{d.y_lo, 1.0 - d.p_hi}, {d.y_hi, d.p_hi}};
        }
    }

    void check(const Tabulated& d) {
        const auto n = d.y.size();
        if (n < 2 || d.density.size() != n)
            throw InvalidModel("tabulated mark law needs >= 2 grid points and one density value per point");
        for (std::size_t k = 0; k < n; ++k) {
            if (!std::isfinite(d.y[k]) || !(d.density[k] >= 0.0) || !std::isfinite(d.density[k]))
                throw InvalidModel("tabulated mark law has a non-finite grid point or negative density at index " +
                                   std::to_string(k));
            if (k > 0 && !(d.y[k] > d.y[k - 1]))
                throw InvalidModel("tabulated grid must be strictly increasing (index " + std::to_string(k) + ")");
        }
        double total = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double left = k > 0 ? d.y[k] - d.y[k - 1] : 0.0;
            const double right = k + 1 < n ? d.y[k + 1] - d.y[k] : 0.0;
            const double w = d.density[k] * 0.5 * (left + right);
            total += w;
            if (w > 0.0) atoms_.emplace_back(d.y[k], w);
        }
        if (std::abs(total - 1.0) > 1e-9)
            throw InvalidModel("tabulated density integrates to " + format_double(total) +
                               " under the trapezoid rule, expected 1 within 1e-9");
    }

    Variant law_;
    std::vector<std::pair<double, double>> atoms_;
    std::vector<double> cumulative_;
};

/// E[g(Y)] with its error estimate. Exact weighted sum for atomic laws;
/// adaptive Gauss-Kronrod for the exponential variants.
template <class G>
QuadratureResult expect_with_error(const JumpDistribution& dist, G&& g,
                                   const QuadratureOptions& opt = {}) {
    if (dist.has_atoms()) {
        double s = 0.0;
        for (auto [y, p] : dist.atoms()) s += p * g(y);
        if (!std::isfinite(s)) throw DomainError("expectation over atoms is not finite");
        return {s, 0.0};
    }
    double rate = 0.0;
    double sign = 1.0;
    if (auto* e = std::get_if<ExponentialPositive>(&dist.law())) {
        rate = e->rate;
    } else {
        rate = std::get<ExponentialNegative>(dist.law()).rate;
        sign = -1.0;
    }
    // u = rate*|y| turns both variants into the standard exponential weight.
    auto integrand = [&](double u) {
        const double w = std::exp(-u);
        if (w == 0.0) return 0.0;
        return g(sign * u / rate) * w;
    };
    return integrate(integrand, 0.0, std::numeric_limits<double>::infinity(), opt);
}

template <class G>
double expect(const JumpDistribution& dist, G&& g) {
    return expect_with_error(dist, std::forward<G>(g)).value;
}

/// E[exp(sY)]; throws DomainError outside the analytic domain of the law.
inline double mgf(const JumpDistribution& dist, double s) {
    if (!dist.in_mgf_domain(s))
        throw DomainError("mgf argument " + format_double(s) + " outside the domain of the " +
                          std::string(dist.name()) + " law (integral diverges)");
    if (auto* e = std::get_if<ExponentialPositive>(&dist.law())) return e->rate / (e->rate - s);
    if (auto* e = std::get_if<ExponentialNegative>(&dist.law())) return e->rate / (e->rate + s);
    double m = 0.0;
    for (auto [y, p] : dist.atoms()) m += p * std::exp(s * y);
    return m;
}

}  // namespace jumpopt
