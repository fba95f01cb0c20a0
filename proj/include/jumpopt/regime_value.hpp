#pragma once

#include <array>
#include <cmath>
#include <sstream>
#include <string>

#include "jumpopt/distribution.hpp"
#include "jumpopt/errors.hpp"
#include "jumpopt/format.hpp"
#include "jumpopt/frictions.hpp"
#include "jumpopt/market.hpp"
#include "jumpopt/policy.hpp"

namespace jumpopt {

/// Inputs of the two-regime log-utility value formulas.
struct RegimeValueInputs {
    double lambda0 = 0.0;
    double lambda1 = 0.0;
    std::array<double, 2> d_bar{0.0, 0.0};
    double T = 1.0;
    double x = 1.0;
    // diagnostics carried along from regime_inputs
    std::array<double, 2> pi_bar{0.0, 0.0};
    std::array<double, 2> eta_bar{0.0, 0.0};
    std::array<double, 2> zeta_bar{0.0, 0.0};

    double lambda_bar() const noexcept { return 0.5 * (lambda0 + lambda1); }
};

namespace detail {

inline void require_value_inputs(const RegimeValueInputs& in, int start) {
    if (start != 0 && start != 1) throw InvalidModel("start regime must be 0 or 1");
    if (!(in.lambda_bar() > 0.0)) throw InvalidModel("degenerate generator: lambda0 + lambda1 must be positive");
    if (!(in.x > 0.0) || !(in.T > 0.0)) throw InvalidModel("initial wealth and horizon must be positive");
}

}  // namespace detail

/// The closed-form theta_0 / theta_1 taken verbatim, sign and (1 + 1/(2 lambda))
/// factor included.
inline double value_corollary(const RegimeValueInputs& in, int start) {
    detail::require_value_inputs(in, start);
    const double l2 = 2.0 * in.lambda_bar();
    const double T = in.T;
    const double d0 = in.d_bar[0], d1 = in.d_bar[1];
    const double head = (T + 1.0) * std::log(in.x) - (T + 1.0) * std::log(T + 1.0);
    const double bracket = T + (1.0 - std::exp(-l2 * T)) * (1.0 + 1.0 / l2);
    const double weight = start == 0 ? in.lambda0 * (d0 - d1) / l2 : -in.lambda1 * (d0 - d1) / l2;
    return head - (1.0 / l2) * ((in.lambda1 * d0 + in.lambda0 * d1) * (T + T * T / 2.0) + weight * bracket);
}

/// Expected log-utility of the log-optimal pair by direct integration:
/// (T+1) ln(x/(T+1)) + int_0^T D(t) dt + D(T), D(t) = E[int_0^t d_{eps(s)} ds],
/// with the two-state transition law p_ij(s) = stationary + (delta_ij - stationary) e^{-2 lambda s}.
inline double value_semianalytic(const RegimeValueInputs& in, int start) {
    detail::require_value_inputs(in, start);
    const double k = in.lambda0 + in.lambda1;
    const double T = in.T;
    const double d0 = in.d_bar[0], d1 = in.d_bar[1];
    const double d_st = (in.lambda1 * d0 + in.lambda0 * d1) / k;
    const double dev = start == 0 ? in.lambda0 * (d0 - d1) / k : -in.lambda1 * (d0 - d1) / k;
    const double decay = -std::expm1(-k * T);  // 1 - e^{-kT}
    return (T + 1.0) * std::log(in.x / (T + 1.0)) + d_st * (T + T * T / 2.0) + (dev / k) * (T + decay * (1.0 - 1.0 / k));
}

/// Outcome of the support / integrability / dual-domain / conjugacy checks.
struct CorollaryConditions {
    std::array<bool, 2> support_ok{true, true};
    std::array<bool, 2> eta_finite{true, true};
    std::array<bool, 2> zeta_in_domain{true, true};
    std::array<double, 2> conjugacy_residual{0.0, 0.0};
    std::string report;

    bool all_pass(double tol = 1e-9) const {
        for (int i = 0; i < 2; ++i)
            if (!support_ok[i] || !eta_finite[i] || !zeta_in_domain[i] || !(conjugacy_residual[i] <= tol)) return false;
        return true;
    }
};

namespace detail {

/// Names the support point where 1 + pi (e^y - 1) <= 0, if any.
inline std::optional<std::string> support_violation(const JumpDistribution& d, JumpTransform tr, double pi) {
    if (d.has_atoms()) {
        for (auto [y, w] : d.atoms())
            if (!(growth_factor(tr, pi, y) > 0.0))
                return "1 + pi*f(y) = " + format_double(growth_factor(tr, pi, y)) + " <= 0 at support point y=" +
                       format_double(y);
        return std::nullopt;
    }
    if (!feasible_portfolios(d, tr).contains(pi)) {
        const bool pos = std::holds_alternative<ExponentialPositive>(d.law());
        return std::string("1 + pi*f(y) <= 0 for y in the ") + (pos ? "upper tail (y -> +inf)" : "lower tail (y -> -inf)") +
               " of the support " + d.support().to_string();
    }
    return std::nullopt;
}

}  // namespace detail

/// Checks conditions (support, finite eta, zeta in N, conjugacy) for given
/// weights pi_bar and dual values zeta_bar; fills eta and d_bar in `in`.
inline CorollaryConditions check_corollary_conditions(const MarketModel& m, RegimeValueInputs& in) {
    CorollaryConditions c;
    std::ostringstream os;
    for (int i = 0; i < 2; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        const auto& p = m.regime(i);
        const double pi = in.pi_bar[ui];
        if (auto v = detail::support_violation(p.dist, m.transform, pi)) {
            c.support_ok[ui] = false;
            c.eta_finite[ui] = false;
            os << "regime " << i << ": support condition fails for pi=" << format_double(pi) << ": " << *v << "\n";
            continue;
        }
        try {
            in.eta_bar[ui] = expect(p.dist, [&](double y) { return std::log(growth_factor(m.transform, pi, y)); });
        } catch (const DomainError& e) {
            c.eta_finite[ui] = false;
            os << "regime " << i << ": eta is not finite: " << e.what() << "\n";
            continue;
        }
        in.d_bar[ui] = wealth_drift(p, pi) + m.lambda(i) * in.eta_bar[ui];
        const double z = in.zeta_bar[ui];
        if (!conjugate_gk(p.margin, p.r, m.K, z).is_finite()) {
            c.zeta_in_domain[ui] = false;
            os << "regime " << i << ": zeta=" << format_double(z) << " outside the dual domain "
               << effective_domain(p.margin, p.r, m.K).to_string() << "\n";
            continue;
        }
        c.conjugacy_residual[ui] = verify_conjugacy(p.margin, p.r, m.K, pi, z);
        if (!(c.conjugacy_residual[ui] <= 1e-9))
            os << "regime " << i << ": conjugacy residual " << format_double(c.conjugacy_residual[ui]) << " > 1e-9\n";
    }
    c.report = os.str();
    return c;
}

/// Inputs for user-chosen weights; the dual value is zeta = r - h_0(pi).
inline RegimeValueInputs regime_inputs_for(const MarketModel& m, std::array<double, 2> pi_bar, double x, double T) {
    m.validate();
    RegimeValueInputs in{m.generator.lambda0, m.generator.lambda1, {0.0, 0.0}, T, x, pi_bar, {0.0, 0.0}, {0.0, 0.0}};
    for (int i = 0; i < 2; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        if (!detail::support_violation(m.regime(i).dist, m.transform, pi_bar[ui]))
            in.zeta_bar[ui] = m.regime(i).r - h_value(h_params(m, i), 0.0, pi_bar[ui]);
    }
    const auto c = check_corollary_conditions(m, in);
    if (!c.all_pass()) throw InfeasibleModel("value formula conditions fail:\n" + c.report);
    return in;
}

/// Inputs at the log-optimal weights of each regime.
inline RegimeValueInputs regime_inputs(const MarketModel& m, double x, double T) {
    const Policy pol = log_optimal_policy(m, x, T);
    RegimeValueInputs in{m.generator.lambda0, m.generator.lambda1, {0.0, 0.0}, T, x,
                         {pol.choice[0].pi, pol.choice[1].pi}, {0.0, 0.0}, pol.zeta()};
    const auto c = check_corollary_conditions(m, in);
    if (!c.all_pass()) throw InfeasibleModel("value formula conditions fail:\n" + c.report);
    return in;
}

}  // namespace jumpopt
