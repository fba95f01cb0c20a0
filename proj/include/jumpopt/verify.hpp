#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "jumpopt/chain.hpp"
#include "jumpopt/distribution.hpp"
#include "jumpopt/errors.hpp"
#include "jumpopt/format.hpp"
#include "jumpopt/frictions.hpp"
#include "jumpopt/market.hpp"
#include "jumpopt/policy.hpp"

namespace jumpopt {

struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t paths = 0;
    std::uint64_t seed = 0;
    std::size_t flagged = 0;  // paths with a ruin / -inf contribution
};

struct McSettings {
    std::size_t paths = 100000;
    std::uint64_t seed = 1;
    int initial_regime = 0;
    unsigned threads = 0;  // 0: hardware concurrency
};

/// Sum with a fixed binary-tree topology; the result depends only on the
/// input order, never on thread scheduling.
inline double pairwise_sum(const double* x, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += x[i];
        return s;
    }
    const std::size_t h = n / 2;
    return pairwise_sum(x, h) + pairwise_sum(x + h, n - h);
}

inline McEstimate summarize(const std::vector<double>& v, std::uint64_t seed) {
    McEstimate e;
    e.paths = v.size();
    e.seed = seed;
    if (v.empty()) return e;
    for (double s : v)
        if (!std::isfinite(s)) ++e.flagged;
    if (e.flagged) {
        e.mean = -std::numeric_limits<double>::infinity();
        e.std_error = std::numeric_limits<double>::quiet_NaN();
        return e;
    }
    e.mean = pairwise_sum(v.data(), v.size()) / static_cast<double>(v.size());
    if (v.size() > 1) {
        std::vector<double> sq(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - e.mean) * (v[i] - e.mean);
        const double var = pairwise_sum(sq.data(), sq.size()) / static_cast<double>(v.size() - 1);
        e.std_error = std::sqrt(var / static_cast<double>(v.size()));
    }
    return e;
}

/// Runs fn(i) for i in [0, n) on contiguous fixed blocks. fn must write only
/// to slot i of its outputs. The first exception thrown is rethrown.
template <class F>
void parallel_for(std::size_t n, F&& fn, unsigned threads = 0) {
    unsigned t = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
    t = static_cast<unsigned>(std::min<std::size_t>(t, std::max<std::size_t>(n, 1)));
    if (t <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(t);
    std::vector<std::thread> pool;
    pool.reserve(t);
    for (unsigned b = 0; b < t; ++b) {
        pool.emplace_back([&, b] {
            const std::size_t lo = n * b / t, hi = n * (b + 1) / t;
            try {
                for (std::size_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                errors[b] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

inline MarkedPointPath simulate_path(const MarketModel& m, double T, int i0, std::uint64_t seed, std::uint64_t index) {
    return simulate_marks(simulate_regime_chain(m.generator, i0, T, seed, index), m.dists(), seed, index);
}

/// Per-regime coefficients of the state-price density.
struct StatePriceCoefficients {
    std::array<double, 2> zeta{0.0, 0.0};
    std::array<ExtendedReal, 2> gk{ExtendedReal::finite(0.0), ExtendedReal::finite(0.0)};
    std::array<double, 2> compensator{0.0, 0.0};  // lambda * int (phi - 1) F
    std::array<double, 2> r{0.0, 0.0};

    /// r + g~_K(zeta) + lambda int (phi - 1) F; throws outside the dual domain.
    double drift(int i) const {
        const auto ui = static_cast<std::size_t>(i);
        return r[ui] + gk[ui].value() + compensator[ui];
    }
};

/// zeta^phi_i = r_i - mu_i - lambda_i int f phi F_i, unless `zeta` overrides
/// it (e.g. with the exact dual value reported by an optimizer).
inline StatePriceCoefficients state_price_coefficients(const MarketModel& m, const PhiSpec& phi,
                                                       std::optional<std::array<double, 2>> zeta = std::nullopt) {
    StatePriceCoefficients c;
    for (int i = 0; i < 2; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        const auto& p = m.regime(i);
        const double lam = m.lambda(i);
        double z = p.r - p.mu;
        double comp = 0.0;
        if (lam > 0.0) {
            const double efphi = expect(p.dist, [&](double y) { return jump_f(m.transform, y) * phi(m.transform, i, y); });
            comp = lam * (expect(p.dist, [&](double y) { return phi(m.transform, i, y); }) - 1.0);
            z -= lam * efphi;
        }
        c.zeta[ui] = zeta ? (*zeta)[ui] : z;
        c.gk[ui] = conjugate_gk(p.margin, p.r, m.K, c.zeta[ui]);
        c.compensator[ui] = comp;
        c.r[ui] = p.r;
    }
    return c;
}

/// H_t = exp(-int [r + g~_K(zeta) + lambda int (phi - 1) F]) * prod phi(Y_n).
/// `extra_times` adds knots so the path lines up with a wealth path that has
/// portfolio step times.
inline LogLinearPath simulate_state_price(const StatePriceCoefficients& c, const PhiSpec& phi, const MarketModel& m,
                                          const MarkedPointPath& path, const std::vector<double>& extra_times = {}) {
    LogLinearPath out(0.0);
    for (const auto& seg : timeline(path, extra_times)) {
        const auto ui = static_cast<std::size_t>(seg.regime);
        if (!c.gk[ui].is_finite())
            throw DomainError("zeta^phi=" + format_double(c.zeta[ui]) + " leaves the dual domain at t=" +
                              format_double(seg.t0) + " (regime " + std::to_string(seg.regime) + ")");
        double jump = 0.0;
        if (seg.mark) {
            const int pre = path.regime.state_before(*seg.mark);
            const double g = growth_factor(m.transform, phi.pi[static_cast<std::size_t>(pre)], path.marks[*seg.mark]);
            if (!(g > 0.0)) throw DomainError("phi is not positive at mark " + std::to_string(*seg.mark));
            jump = (phi.gamma - 1.0) * std::log(g);
        }
        out.extend(seg.t0, seg.t1, -c.drift(seg.regime), seg.regime, jump);
    }
    return out;
}

/// int_0^T H_s c_s ds for a wealth path whose knots contain those of H.
inline double deflated_consumption(const WealthPath& w, const LogLinearPath& H) {
    const auto& g = w.gross();
    double total = 0.0;
    for (std::size_t k = 0; k < g.segments(); ++k) {
        const double t0 = g.knot(k), t1 = g.segment_end(k);
        if (t1 <= t0) continue;
        const double lh0 = H.log_at(t0);
        const double sh = H.slope(H.segment_index(t0));
        const auto& c = w.consumption();
        if (auto* p = std::get_if<ProportionalConsumption>(&c)) {
            total += p->scale * integrate_exp_linear(lh0 + g.log_start(k), sh + g.slope(k), t0, t1);
        } else if (auto* p = std::get_if<ConstantConsumption>(&c)) {
            total += p->rate * integrate_exp_linear(lh0, sh, t0, t1);
        } else if (auto* p = std::get_if<DeterministicConsumption>(&c)) {
            auto f = [&](double s) { return p->rate(s) * std::exp(lh0 + sh * (s - t0)); };
            total += integrate(f, t0, t1).value;
        }
    }
    return total;
}

/// MC estimate of E[H_T V_T + int_0^T H_s c_s ds] - x.
inline McEstimate budget_check(const MarketModel& m, const PortfolioRule& pi, const ConsumptionRule& c,
                               const PhiSpec& phi, const StatePriceCoefficients& coeffs, double x, double T,
                               const McSettings& s) {
    std::vector<double> v(s.paths);
    parallel_for(
        s.paths,
        [&](std::size_t i) {
            const auto path = simulate_path(m, T, s.initial_regime, s.seed, i);
            const auto w = wealth_path(x, m, pi, c, path);
            const auto H = simulate_state_price(coeffs, phi, m, path, pi.step_times);
            v[i] = std::exp(H.log_terminal()) * w.value_at(T) + deflated_consumption(w, H) - x;
        },
        s.threads);
    return summarize(v, s.seed);
}

/// int_0^T U1(c_t) dt + U2(V_T) along one wealth path; -inf on ruin.
inline double path_utility(const WealthPath& w, const Utility& u) {
    if (w.ruined()) return -std::numeric_limits<double>::infinity();
    const double T = w.horizon();
    const auto& g = w.gross();
    const auto& c = w.consumption();
    double running = 0.0;
    const double gamma = u.gamma();
    if (std::holds_alternative<NoConsumption>(c)) {
        running = u.is_log() ? -std::numeric_limits<double>::infinity() : 0.0;
    } else if (auto* p = std::get_if<ConstantConsumption>(&c)) {
        running = T * u(p->rate);
    } else if (auto* p = std::get_if<ProportionalConsumption>(&c)) {
        for (std::size_t k = 0; k < g.segments(); ++k) {
            const double t0 = g.knot(k), t1 = g.segment_end(k);
            if (t1 <= t0) continue;
            const double l0 = g.log_start(k), sl = g.slope(k);
            if (u.is_log()) {
                running += (t1 - t0) * (std::log(p->scale) + l0 + 0.5 * sl * (t1 - t0));
            } else {
                running += std::pow(p->scale, gamma) / gamma * integrate_exp_linear(gamma * l0, gamma * sl, t0, t1);
            }
        }
    } else if (auto* p = std::get_if<DeterministicConsumption>(&c)) {
        running = integrate([&](double t) { return u(p->rate(t)); }, 0.0, T).value;
    }
    const double vt = w.value_at(T);
    if (!(vt > 0.0)) return -std::numeric_limits<double>::infinity();
    return running + u(vt);
}

/// MC estimate of J(x; pi, c).
inline McEstimate mc_expected_utility(const MarketModel& m, const PortfolioRule& pi, const ConsumptionRule& c,
                                      const Utility& u, double x, double T, const McSettings& s) {
    std::vector<double> v(s.paths);
    parallel_for(
        s.paths,
        [&](std::size_t i) {
            const auto path = simulate_path(m, T, s.initial_regime, s.seed, i);
            v[i] = path_utility(wealth_path(x, m, pi, c, path, true), u);
        },
        s.threads);
    return summarize(v, s.seed);
}

struct GridSpec {
    double lo = -2.0;
    double hi = 2.0;
    double step = 0.01;
};

struct GridPoint {
    double pi;
    std::optional<McEstimate> estimate;
    std::string skipped;  // reason when estimate is empty
};

struct GridSearchResult {
    std::vector<GridPoint> table;
    std::size_t argmax = 0;
    double pi_star() const { return table[argmax].pi; }
};

namespace detail {

/// What a constant-weight utility needs from one path: the (T - s + 1)
/// weighted and plain occupation times, and the marks with their weights.
struct PathSummary {
    std::array<double, 2> weighted{0.0, 0.0};
    std::array<double, 2> occupation{0.0, 0.0};
    std::vector<std::array<double, 3>> marks;  // (T - tau + 1, y, pre-state)
};

inline PathSummary summarize_path(const MarkedPointPath& path) {
    PathSummary s;
    const double T = path.horizon();
    for (const auto& seg : timeline(path)) {
        const auto ui = static_cast<std::size_t>(seg.regime);
        const double a = seg.t0, b = seg.t1;
        s.occupation[ui] += b - a;
        // int_a^b (T - s + 1) ds
        s.weighted[ui] += (b - a) * (T + 1.0 - 0.5 * (a + b));
        if (seg.mark)
            s.marks.push_back({T - b + 1.0, path.marks[*seg.mark], double(path.regime.state_before(*seg.mark))});
    }
    return s;
}

}  // namespace detail

/// Common-random-number MC of J over constant weights on a grid in K. Log
/// utility uses the proportional rule c = x V^{1,pi,0}/(T+1); power utility
/// has no consumption. Every grid point sees the same simulated paths.
inline GridSearchResult grid_search_constant_portfolio(const MarketModel& m, const Utility& u, const GridSpec& grid,
                                                       double x, double T, const McSettings& s) {
    m.validate();
    std::vector<detail::PathSummary> paths(s.paths);
    parallel_for(
        s.paths, [&](std::size_t i) { paths[i] = detail::summarize_path(simulate_path(m, T, s.initial_regime, s.seed, i)); },
        s.threads);

    GridSearchResult out;
    const auto n = static_cast<std::size_t>(std::llround((grid.hi - grid.lo) / grid.step));
    for (std::size_t j = 0; j <= n; ++j) {
        const double pi = grid.lo + static_cast<double>(j) * grid.step;
        GridPoint gp{pi, std::nullopt, {}};
        if (!m.K.contains(pi)) {
            if (pi < m.K.lower - 1e-12 || pi > m.K.upper + 1e-12) continue;  // outside K: not part of the grid
        }
        for (int i = 0; i < 2; ++i)
            if (!feasible_portfolios(m.regime(i).dist, m.transform).contains(pi))
                gp.skipped = "1 + pi*f <= 0 on the support of regime " + std::to_string(i);
        out.table.push_back(gp);
    }
    const double k = x / (T + 1.0);
    parallel_for(
        out.table.size(),
        [&](std::size_t j) {
            auto& gp = out.table[j];
            if (!gp.skipped.empty()) return;
            const double pi = gp.pi;
            const std::array<double, 2> a{wealth_drift(m.regime(0), pi), wealth_drift(m.regime(1), pi)};
            std::vector<double> v(paths.size());
            for (std::size_t i = 0; i < paths.size(); ++i) {
                const auto& p = paths[i];
                if (u.is_log()) {
                    double jv = (T + 1.0) * std::log(k) + a[0] * p.weighted[0] + a[1] * p.weighted[1];
                    for (const auto& mk : p.marks) jv += mk[0] * std::log(growth_factor(m.transform, pi, mk[1]));
                    v[i] = jv;
                } else {
                    double lv = std::log(x) + a[0] * p.occupation[0] + a[1] * p.occupation[1];
                    for (const auto& mk : p.marks) lv += std::log(growth_factor(m.transform, pi, mk[1]));
                    v[i] = std::exp(u.gamma() * lv) / u.gamma();
                }
            }
            gp.estimate = summarize(v, s.seed);
        },
        s.threads);
    bool found = false;
    for (std::size_t j = 0; j < out.table.size(); ++j) {
        if (!out.table[j].estimate) continue;
        if (!found || out.table[j].estimate->mean > out.table[out.argmax].estimate->mean) out.argmax = j, found = true;
    }
    if (!found) throw InfeasibleModel("grid search: every grid point is infeasible");
    return out;
}

/// Max over paths and report-grid points of
/// |V^{x,pi,c}_t - V^{x,pi,0}_t (1 - t/(T+1))| / V^{x,pi,0}_t for the log optimum.
inline double wealth_identity_check(const MarketModel& m, double x, double T, const McSettings& s) {
    const Policy pol = log_optimal_policy(m, x, T);
    const auto rule = pol.portfolio();
    std::vector<double> dev(s.paths);
    parallel_for(
        s.paths,
        [&](std::size_t i) {
            const auto path = simulate_path(m, T, s.initial_regime, s.seed, i);
            const auto w = wealth_path(x, m, rule, pol.consumption, path);
            double worst = 0.0;
            for (double t : report_grid(path)) {
                const double v0 = x * w.gross_at(t);
                worst = std::max(worst, std::abs(w.value_at(t) - v0 * (1.0 - t / (T + 1.0))) / v0);
            }
            dev[i] = worst;
        },
        s.threads);
    return dev.empty() ? 0.0 : *std::max_element(dev.begin(), dev.end());
}

/// MC estimate of E[H_T exp(int_0^T (r + g~_K(zeta)) ds)], which is 1 because
/// the remaining pure-jump factor is an exponential martingale.
inline McEstimate martingale_factor_check(const MarketModel& m, const PhiSpec& phi, const StatePriceCoefficients& c,
                                          double T, const McSettings& s) {
    std::vector<double> v(s.paths);
    parallel_for(
        s.paths,
        [&](std::size_t i) {
            const auto path = simulate_path(m, T, s.initial_regime, s.seed, i);
            const auto H = simulate_state_price(c, phi, m, path);
            double discount = 0.0;
            for (std::size_t k = 0; k < H.segments(); ++k) {
                const auto ui = static_cast<std::size_t>(H.regime(k));
                discount += (H.segment_end(k) - H.knot(k)) * (c.r[ui] + c.gk[ui].value());
            }
            v[i] = std::exp(H.log_terminal() + discount);
        },
        s.threads);
    return summarize(v, s.seed);
}

/// Max over paths and report-grid points of |H_t V_t^{1,pi,0} - 1| for the
/// state price built from the policy's phi and dual values.
inline double state_price_inverse_wealth_check(const MarketModel& m, const Policy& pol, double T, const McSettings& s) {
    const auto phi = pol.phi();
    const auto coeffs = state_price_coefficients(m, phi, pol.zeta());
    const auto rule = pol.portfolio();
    std::vector<double> dev(s.paths);
    parallel_for(
        s.paths,
        [&](std::size_t i) {
            const auto path = simulate_path(m, T, s.initial_regime, s.seed, i);
            const auto H = simulate_state_price(coeffs, phi, m, path);
            const auto V = gross_wealth_path(m, rule, path);
            double worst = 0.0;
            for (double t : report_grid(path)) worst = std::max(worst, std::abs(std::expm1(H.log_at(t) + V.log_at(t))));
            dev[i] = worst;
        },
        s.threads);
    return dev.empty() ? 0.0 : *std::max_element(dev.begin(), dev.end());
}

struct DualityGap {
    McEstimate primal;  // J(x; pi, c)
    McEstimate dual;    // L(x; phi)
    double gap() const { return primal.mean - dual.mean; }
    double combined_std_error() const { return std::hypot(primal.std_error, dual.std_error); }
};

/// J(x; pi^, c^) against L(x; phi^) on common paths. Log case: c = x/((T+1)H),
/// G = x/((T+1)H_T). Power case (no consumption, identical regimes):
/// G = (x/kappa) H_T^{1/(gamma-1)} with kappa = E[H_T^{gamma/(gamma-1)}] in closed form.
inline DualityGap duality_gap(const MarketModel& m, const Policy& pol, double x, double T, const McSettings& s) {
    const auto phi = pol.phi();
    const auto coeffs = state_price_coefficients(m, phi, pol.zeta());
    const auto rule = pol.portfolio();
    const Utility& u = pol.utility;
    double log_kappa = 0.0;
    if (!u.is_log()) {
        if (!(m.regimes[0] == m.regimes[1]) || m.generator.lambda0 != m.generator.lambda1)
            throw InvalidModel("power-utility dual functional needs non-random coefficients (identical regimes)");
        const double g = u.gamma();
        const double q = g / (g - 1.0);
        const auto& p = m.regime(0);
        double jump_part = 0.0;
        if (m.lambda(0) > 0.0)
            jump_part = m.lambda(0) * expect(p.dist, [&](double y) {
                            const double f = phi(m.transform, 0, y);
                            return std::pow(f, q) - 1.0 + q * (1.0 - f);
                        });
        log_kappa = T * (-q * (p.r + coeffs.gk[0].value()) + jump_part);
    }
    std::vector<double> jv(s.paths), lv(s.paths);
    parallel_for(
        s.paths,
        [&](std::size_t i) {
            const auto path = simulate_path(m, T, s.initial_regime, s.seed, i);
            const auto w = wealth_path(x, m, rule, pol.consumption, path, true);
            jv[i] = path_utility(w, u);
            const auto H = simulate_state_price(coeffs, phi, m, path);
            if (u.is_log()) {
                // int_0^T ln H dt, exact per segment
                double int_log_h = 0.0;
                for (std::size_t k = 0; k < H.segments(); ++k) {
                    const double t0 = H.knot(k), t1 = H.segment_end(k);
                    int_log_h += (t1 - t0) * (H.log_start(k) + 0.5 * H.slope(k) * (t1 - t0));
                }
                lv[i] = (T + 1.0) * std::log(x / (T + 1.0)) - int_log_h - H.log_terminal();
            } else {
                const double g = u.gamma();
                const double log_g = std::log(x) - log_kappa + H.log_terminal() / (g - 1.0);
                lv[i] = std::exp(g * log_g) / g;
            }
        },
        s.threads);
    return {summarize(jv, s.seed), summarize(lv, s.seed)};
}

}  // namespace jumpopt
