// Command-line front-end: optimize, value, simulate, figures, verify.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "jumpopt/jumpopt.hpp"

namespace {

struct Overrides {
    std::string config;
    std::optional<double> gamma;
    std::optional<std::size_t> paths;
    std::optional<std::uint64_t> seed;
    std::optional<double> horizon;
    std::optional<double> wealth;
    std::optional<int> regime;
    std::optional<std::string> output_dir;
};

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("-c,--config", o.config, "JSON run configuration")->required();
    cmd->add_option("--gamma", o.gamma, "utility exponent; 0 selects log utility");
    cmd->add_option("--paths", o.paths, "Monte Carlo path count");
    cmd->add_option("--seed", o.seed, "Monte Carlo seed");
    cmd->add_option("--horizon", o.horizon, "horizon T");
    cmd->add_option("--wealth", o.wealth, "initial wealth x");
    cmd->add_option("--regime", o.regime, "initial regime (0 or 1)");
    cmd->add_option("-o,--output-dir", o.output_dir, "directory for CSV output");
}

jumpopt::RunConfig resolve(const Overrides& o) {
    using jumpopt::ValidationError;
    auto cfg = jumpopt::load_config(o.config);
    if (o.gamma) {
        if (*o.gamma == 0.0) cfg.utility = jumpopt::Utility::log();
        else if (*o.gamma > 0.0 && *o.gamma < 1.0) cfg.utility = jumpopt::Utility::power(*o.gamma);
        else throw ValidationError("--gamma", "must be 0 (log) or lie in (0, 1)");
    }
    if (o.paths) {
        if (*o.paths < 2) throw ValidationError("--paths", "must be >= 2");
        cfg.paths = *o.paths;
    }
    if (o.seed) cfg.seed = *o.seed;
    if (o.horizon) {
        if (!(*o.horizon > 0.0)) throw ValidationError("--horizon", "must be positive");
        cfg.horizon = *o.horizon;
    }
    if (o.wealth) {
        if (!(*o.wealth > 0.0)) throw ValidationError("--wealth", "must be positive");
        cfg.initial_wealth = *o.wealth;
    }
    if (o.regime) {
        if (*o.regime != 0 && *o.regime != 1) throw ValidationError("--regime", "must be 0 or 1");
        cfg.initial_regime = *o.regime;
    }
    if (o.output_dir) cfg.output_dir = *o.output_dir;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Optimal investment and consumption in pure-jump markets with frictions"};
    app.require_subcommand(1);

    Overrides o;
    int figure = 1;
    std::size_t count = 1;
    auto* optimize = app.add_subcommand("optimize", "optimal portfolio per regime with case label and dual value");
    auto* value = app.add_subcommand("value", "regime-switching log-utility value: closed form, semi-analytic, MC");
    auto* simulate = app.add_subcommand("simulate", "write simulated paths under the optimal policy as CSV");
    auto* figures = app.add_subcommand("figures", "emit h(pi) or pi_hat(gamma) curves as CSV");
    auto* verify = app.add_subcommand("verify", "duality and Monte Carlo verification suite");
    for (auto* c : {optimize, value, simulate, figures, verify}) add_common(c, o);
    figures->add_option("-f,--figure", figure, "1/3: h over pi, 2/4: pi_hat over gamma")->check(CLI::Range(1, 4));
    simulate->add_option("-n,--count", count, "number of paths to write");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : jumpopt::exit_validation;
    }

    return jumpopt::run_guarded(
        [&] {
            const auto cfg = resolve(o);
            if (*optimize) return jumpopt::cmd_optimize(cfg, std::cout);
            if (*value) return jumpopt::cmd_value(cfg, std::cout);
            if (*simulate) return jumpopt::cmd_simulate(cfg, count, std::cout);
            if (*figures) return jumpopt::cmd_figures(cfg, figure, std::cout);
            return jumpopt::cmd_verify(cfg, std::cout);
        },
        std::cerr);
}
