#pragma once

#include <cstdlib>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "jumpopt/config.hpp"
#include "jumpopt/errors.hpp"
#include "jumpopt/format.hpp"
#include "jumpopt/market.hpp"
#include "jumpopt/policy.hpp"
#include "jumpopt/regime_value.hpp"
#include "jumpopt/rng.hpp"
#include "jumpopt/verify.hpp"

namespace jumpopt {

enum ExitCode : int { exit_ok = 0, exit_validation = 1, exit_infeasible = 2, exit_verification = 3 };

/// Config value, else $JUMPOPT_OUTPUT_DIR, else the working directory.
inline std::filesystem::path output_directory(const RunConfig& cfg) {
    if (!cfg.output_dir.empty()) return cfg.output_dir;
    if (const char* env = std::getenv("JUMPOPT_OUTPUT_DIR"); env && *env) return env;
    return ".";
}

inline std::ofstream open_csv(const RunConfig& cfg, const std::string& name, std::filesystem::path* where = nullptr) {
    const auto dir = output_directory(cfg);
    std::filesystem::create_directories(dir);
    const auto file = dir / name;
    std::ofstream out(file);
    if (!out) throw Error("cannot write " + file.string());
    out << "# config_hash=" << config_hash(cfg) << " seed=" << cfg.seed << "\n";
    if (where) *where = file;
    return out;
}

/// Per-regime optimal weights, case labels, dual values and residuals.
inline int cmd_optimize(const RunConfig& cfg, std::ostream& out) {
    const auto& m = cfg.model;
    const double gamma = cfg.utility.gamma();
    out << "utility " << (cfg.utility.is_log() ? std::string("log") : "power gamma=" + format_double(gamma))
        << ", K=" << m.K.to_string() << "\n";
    for (int i = 0; i < 2; ++i) {
        const auto& p = m.regime(i);
        const auto c = optimal_portfolio(m, i, gamma);
        const double res = verify_conjugacy(p.margin, p.r, m.K, c.pi, c.zeta);
        out << "regime " << i << ": margin=" << margin_name(p.margin) << " pi_hat=" << format_double(c.pi)
            << " case=" << c.case_label << " (" << c.branch << ") zeta_hat=" << format_double(c.zeta)
            << " conjugacy_residual=" << format_double(res) << " h(pi_hat)=" << format_double(c.h_at_pi) << "\n";
    }
    if (cfg.utility.is_log())
        out << "consumption: c_t = " << format_double(cfg.initial_wealth / (cfg.horizon + 1.0)) << " * V_t^{1,pi,0}\n";
    else
        out << "consumption: none\n";
    return exit_ok;
}

/// Figure 1/3: h over a pi-grid for several gammas. Figure 2/4: pi_hat over a
/// gamma-grid. Regime 0 coefficients are used.
inline int cmd_figures(const RunConfig& cfg, int figure, std::ostream& log) {
    if (figure < 1 || figure > 4) throw ValidationError("figure", "expected 1, 2, 3 or 4");
    const auto& m = cfg.model;
    const auto& fs = cfg.figures;
    const HParams hp = h_params(m, 0);
    std::filesystem::path file;
    auto out = open_csv(cfg, "figure" + std::to_string(figure) + ".csv", &file);
    if (figure == 1 || figure == 3) {
        out << "pi";
        for (double g : fs.gammas) {
            char label[32];
            std::snprintf(label, sizeof label, "%g", g);
            out << ",h_gamma" << label;
        }
        out << "\n";
        std::size_t empty = 0;
        for (std::size_t k = 0; k < fs.pi_points; ++k) {
            const double pi = fs.pi_min + (fs.pi_max - fs.pi_min) * static_cast<double>(k) /
                                              static_cast<double>(fs.pi_points - 1);
            out << format_double(pi);
            for (double g : fs.gammas) {
                out << ',';
                try {
                    out << format_double(h_value(hp, g, pi));
                } catch (const DomainError&) {
                    ++empty;
                }
            }
            out << "\n";
        }
        if (empty)
            out << "# " << empty << " empty cells: 1 + pi*f <= 0 on the support or the integral diverges\n";
    } else {
        out << "gamma,pi_hat,case,zeta_hat,conjugacy_residual\n";
        const auto& p = m.regime(0);
        std::size_t empty = 0;
        for (std::size_t k = 0; k < fs.gamma_points; ++k) {
            const double g = fs.gamma_max * static_cast<double>(k) / static_cast<double>(fs.gamma_points - 1);
            out << format_double(g) << ',';
            try {
                const auto c = optimal_portfolio(m, 0, g);
                out << format_double(c.pi) << ',' << c.case_label << ',' << format_double(c.zeta) << ','
                    << format_double(verify_conjugacy(p.margin, p.r, m.K, c.pi, c.zeta)) << "\n";
            } catch (const Error&) {
                out << ",,,\n";
                ++empty;
            }
        }
        if (empty) out << "# " << empty << " empty rows: no optimal portfolio for these gammas\n";
    }
    log << "wrote " << file.string() << "\n";
    return exit_ok;
}

/// Closed-form value, semi-analytic value and MC estimate for both start regimes.
inline int cmd_value(const RunConfig& cfg, std::ostream& out) {
    const auto in = regime_inputs(cfg.model, cfg.initial_wealth, cfg.horizon);
    const auto pol = log_optimal_policy(cfg.model, cfg.initial_wealth, cfg.horizon);
    out << "pi_bar=(" << format_double(in.pi_bar[0]) << ", " << format_double(in.pi_bar[1]) << ") d_bar=("
        << format_double(in.d_bar[0]) << ", " << format_double(in.d_bar[1]) << ")\n";
    for (int i = 0; i < 2; ++i) {
        auto s = cfg.mc();
        s.initial_regime = i;
        const auto mc = mc_expected_utility(cfg.model, pol.portfolio(), pol.consumption, Utility::log(),
                                            cfg.initial_wealth, cfg.horizon, s);
        out << "start " << i << ": closed_form=" << format_double(value_corollary(in, i))
            << " semianalytic=" << format_double(value_semianalytic(in, i)) << " mc=" << format_double(mc.mean)
            << " stderr=" << format_double(mc.std_error) << " paths=" << mc.paths << "\n";
    }
    return exit_ok;
}

/// Writes `count` simulated paths under the optimal policy as CSV.
inline int cmd_simulate(const RunConfig& cfg, std::size_t count, std::ostream& log) {
    const auto pol = optimal_policy(cfg.model, cfg.utility, cfg.initial_wealth, cfg.horizon);
    for (std::size_t k = 0; k < count; ++k) {
        const auto path = simulate_path(cfg.model, cfg.horizon, cfg.initial_regime, cfg.seed, k);
        const auto stock = stock_path(cfg.model, path, 1.0);
        const auto w = wealth_path(cfg.initial_wealth, cfg.model, pol.portfolio(), pol.consumption, path);
        std::filesystem::path file;
        auto out = open_csv(cfg, "path_" + std::to_string(k) + ".csv", &file);
        write_path_csv(out, path, stock, w);
        log << "wrote " << file.string() << " (" << path.size() << " jumps)\n";
    }
    return exit_ok;
}

struct CheckResult {
    std::string name;
    bool pass;
    std::string detail;
    double value = 0.0;
    double std_error = 0.0;
};

/// Draws 20 admissible constant pairs: weights uniform on K, feasible set and
/// [-2, 2]; proportional consumption with scale below x/T.
inline std::vector<std::pair<PortfolioRule, ConsumptionRule>> random_admissible_pairs(const MarketModel& m, double x,
                                                                                      double T, std::uint64_t seed,
                                                                                      std::size_t count = 20) {
    std::vector<std::pair<PortfolioRule, ConsumptionRule>> out;
    for (std::size_t k = 0; k < count; ++k) {
        CounterRng rng(seed, k, Stream::policy);
        std::array<double, 2> w{};
        for (int i = 0; i < 2; ++i) {
            const auto feas = feasible_portfolios(m.regime(i).dist, m.transform);
            double lo = std::max(m.K.lower, -2.0), hi = std::min(m.K.upper, 2.0);
            if (feas.lower) lo = std::max(lo, *feas.lower + (feas.lower_closed ? 0.0 : 1e-6));
            if (feas.upper) hi = std::min(hi, *feas.upper - (feas.upper_closed ? 0.0 : 1e-6));
            w[static_cast<std::size_t>(i)] = lo + (hi - lo) * rng.uniform();
        }
        const double scale = 0.9 * rng.uniform() * x / T;
        out.emplace_back(PortfolioRule::per_regime(w[0], w[1]), ProportionalConsumption{scale});
    }
    return out;
}

/// The verification suite for the optimum of the configured utility.
inline std::vector<CheckResult> run_verify_suite(const RunConfig& cfg) {
    const auto& m = cfg.model;
    const double x = cfg.initial_wealth, T = cfg.horizon;
    const auto s = cfg.mc();
    const auto pol = optimal_policy(m, cfg.utility, x, T);
    const auto phi = pol.phi();
    const auto coeffs = state_price_coefficients(m, phi, pol.zeta());
    std::vector<CheckResult> out;
    auto within = [](const McEstimate& e, double target, double floor) {
        return std::abs(e.mean - target) <= 3.0 * e.std_error + floor;
    };

    for (int i = 0; i < 2; ++i) {
        const auto& p = m.regime(i);
        const double res = verify_conjugacy(p.margin, p.r, m.K, pol.choice[i].pi, pol.choice[i].zeta);
        out.push_back({"conjugacy regime " + std::to_string(i), res <= 1e-9, "residual " + format_double(res), res, 0.0});
    }
    {
        const auto e = martingale_factor_check(m, phi, coeffs, T, s);
        out.push_back({"state-price martingale factor", within(e, 1.0, 0.0),
                       "mean " + format_double(e.mean) + " stderr " + format_double(e.std_error), e.mean, e.std_error});
    }
    if (cfg.utility.is_log()) {
        auto s3 = s;
        s3.paths = std::min<std::size_t>(s.paths, 1000);
        const double d = state_price_inverse_wealth_check(m, pol, T, s3);
        out.push_back({"H = 1/V^{1,pi,0} pathwise", d <= 1e-10, "max deviation " + format_double(d), d, 0.0});
        const double w = wealth_identity_check(m, x, T, s3);
        out.push_back({"log wealth identity", w <= 1e-10, "max relative deviation " + format_double(w), w, 0.0});
    }
    {
        const auto e = budget_check(m, pol.portfolio(), pol.consumption, phi, coeffs, x, T, s);
        out.push_back({"budget equality at the optimum", within(e, 0.0, 1e-10 * x),
                       "mean " + format_double(e.mean) + " stderr " + format_double(e.std_error), e.mean, e.std_error});
    }
    {
        std::size_t bad = 0;
        double worst = -std::numeric_limits<double>::infinity();
        for (const auto& [rule, c] : random_admissible_pairs(m, x, T, s.seed)) {
            const auto e = budget_check(m, rule, c, phi, coeffs, x, T, s);
            if (e.mean > 3.0 * e.std_error + 1e-10 * x) ++bad;
            worst = std::max(worst, e.mean - 3.0 * e.std_error);
        }
        out.push_back({"budget inequality, 20 random pairs", bad == 0,
                       std::to_string(bad) + " violations, max(mean - 3 stderr) " + format_double(worst), worst, 0.0});
    }
    {
        const auto g = duality_gap(m, pol, x, T, s);
        out.push_back({"duality gap", std::abs(g.gap()) <= 3.0 * g.combined_std_error() + 1e-10,
                       "J " + format_double(g.primal.mean) + " L " + format_double(g.dual.mean) + " gap " +
                           format_double(g.gap()),
                       g.gap(), g.combined_std_error()});
    }
    return out;
}

inline int cmd_verify(const RunConfig& cfg, std::ostream& out) {
    const auto results = run_verify_suite(cfg);
    std::filesystem::path file;
    auto csv = open_csv(cfg, "verify.csv", &file);
    csv << "check,pass,value,std_error\n";
    bool ok = true;
    for (const auto& r : results) {
        out << (r.pass ? "[PASS] " : "[FAIL] ") << r.name << ": " << r.detail << "\n";
        csv << '"' << r.name << "\"," << (r.pass ? 1 : 0) << ',' << format_double(r.value) << ','
            << format_double(r.std_error) << "\n";
        ok = ok && r.pass;
    }
    out << "wrote " << file.string() << "\n";
    return ok ? exit_ok : exit_verification;
}

/// Maps library errors to exit codes; `body` returns the success code.
template <class F>
int run_guarded(F&& body, std::ostream& err) {
    try {
        return body();
    } catch (const ValidationError& e) {
        err << "validation error: " << e.what() << "\n";
        return exit_validation;
    } catch (const InvalidModel& e) {
        err << "invalid model: " << e.what() << "\n";
        return exit_validation;
    } catch (const InfeasibleModel& e) {
        err << "infeasible model: " << e.what() << "\n";
        return exit_infeasible;
    } catch (const RangeError& e) {
        err << "infeasible model: " << e.what() << "\n";
        return exit_infeasible;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_infeasible;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_validation;
    }
}

}  // namespace jumpopt
