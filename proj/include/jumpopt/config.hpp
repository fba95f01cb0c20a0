#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "jumpopt/errors.hpp"
#include "jumpopt/market.hpp"
#include "jumpopt/policy.hpp"
#include "jumpopt/verify.hpp"

namespace jumpopt {

struct FigureSettings {
    double pi_min = 0.0;
    double pi_max = 3.0;
    std::size_t pi_points = 500;
    std::vector<double> gammas{0.0, 0.25, 0.5, 0.75, 0.9};
    std::size_t gamma_points = 200;
    double gamma_max = 0.99;

    friend bool operator==(const FigureSettings&, const FigureSettings&) = default;
};

struct RunConfig {
    MarketModel model;
    int initial_regime = 0;
    Utility utility = Utility::log();
    double horizon = 1.0;
    double initial_wealth = 1.0;
    std::size_t paths = 100000;
    std::uint64_t seed = 1;
    std::string output_dir;  // empty: $JUMPOPT_OUTPUT_DIR, else "."
    FigureSettings figures;

    McSettings mc() const { return {paths, seed, initial_regime, 0}; }

    friend bool operator==(const RunConfig& a, const RunConfig& b) {
        return a.model == b.model && a.initial_regime == b.initial_regime && a.utility == b.utility &&
               a.horizon == b.horizon && a.initial_wealth == b.initial_wealth && a.paths == b.paths &&
               a.seed == b.seed && a.output_dir == b.output_dir && a.figures == b.figures;
    }
};

namespace detail {

using json = nlohmann::json;

/// Field-path aware reader; every accessor rejects wrong types and
/// `finish()` rejects keys that were never read.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ValidationError(path_.empty() ? "<root>" : path_, "expected an object");
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    bool has(const std::string& key) const { return j_.contains(key); }

    const json& raw(const std::string& key) {
        seen_.insert(key);
        if (!j_.contains(key)) throw ValidationError(field(key), "required field is missing");
        return j_.at(key);
    }

    double number(const std::string& key) {
        const auto& v = raw(key);
        if (!v.is_number()) throw ValidationError(field(key), "expected a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) throw ValidationError(field(key), "expected a finite number");
        return d;
    }
    double number_or(const std::string& key, double def) { return has(key) ? number(key) : def; }

    /// Number or null (null means infinite with the given sign).
    double bound(const std::string& key, double if_null) {
        if (!has(key)) {
            seen_.insert(key);
            return if_null;
        }
        const auto& v = raw(key);
        if (v.is_null()) return if_null;
        if (!v.is_number()) throw ValidationError(field(key), "expected a number or null");
        return v.get<double>();
    }

    std::uint64_t unsigned_int(const std::string& key) {
        const auto& v = raw(key);
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
            throw ValidationError(field(key), "expected a non-negative integer");
        return v.get<std::uint64_t>();
    }

    std::string string(const std::string& key) {
        const auto& v = raw(key);
        if (!v.is_string()) throw ValidationError(field(key), "expected a string");
        return v.get<std::string>();
    }

    std::vector<double> numbers(const std::string& key) {
        const auto& v = raw(key);
        if (!v.is_array()) throw ValidationError(field(key), "expected an array of numbers");
        std::vector<double> out;
        for (std::size_t k = 0; k < v.size(); ++k) {
            if (!v[k].is_number()) throw ValidationError(field(key) + "[" + std::to_string(k) + "]", "expected a number");
            out.push_back(v[k].get<double>());
        }
        return out;
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ValidationError(field(it.key()), "unknown key");
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

inline JumpDistribution parse_distribution(const json& j, const std::string& path) {
    Reader r(j, path);
    const auto variant = r.string("variant");
    try {
        if (variant == "exponential_positive" || variant == "exponential_negative") {
            const double rate = r.number("rate");
            r.finish();
            if (variant == "exponential_positive") return JumpDistribution(ExponentialPositive{rate});
            return JumpDistribution(ExponentialNegative{rate});
        }
        if (variant == "two_point") {
            TwoPoint t{r.number("y_lo"), r.number("y_hi"), r.number("p_hi")};
            r.finish();
            return JumpDistribution(t);
        }
        if (variant == "tabulated") {
            Tabulated t{r.numbers("y"), r.numbers("density")};
            r.finish();
            return JumpDistribution(std::move(t));
        }
    } catch (const InvalidModel& e) {
        throw ValidationError(path, e.what());
    }
    throw ValidationError(r.field("variant"), "unknown distribution variant '" + variant +
                                                  "' (exponential_positive, exponential_negative, two_point, tabulated)");
}

inline MarginModel parse_margin(const json& j, const std::string& path, double r) {
    Reader rd(j, path);
    const auto variant = rd.string("variant");
    MarginModel m;
    std::string check_field = path;
    if (variant == "frictionless") {
        m = Frictionless{};
    } else if (variant == "differential_rates") {
        m = DifferentialRates{rd.number("borrow_rate")};
        check_field = rd.field("borrow_rate");
    } else if (variant == "short_rebate") {
        m = ShortRebate{rd.number("loan_rate")};
        check_field = rd.field("loan_rate");
    } else if (variant == "piecewise_linear") {
        m = PiecewiseLinearConcave{rd.numbers("breakpoints"), rd.numbers("slopes")};
    } else {
        throw ValidationError(rd.field("variant"), "unknown margin variant '" + variant +
                                                       "' (frictionless, differential_rates, short_rebate, piecewise_linear)");
    }
    rd.finish();
    try {
        validate_margin(m, r);
    } catch (const InvalidModel& e) {
        throw ValidationError(check_field, e.what());
    }
    return m;
}

inline RegimeParams parse_regime(const json& j, const std::string& path) {
    Reader r(j, path);
    RegimeParams p;
    p.r = r.number("r");
    p.mu = r.number("mu");
    p.margin = parse_margin(r.raw("margin"), r.field("margin"), p.r);
    p.dist = parse_distribution(r.raw("distribution"), r.field("distribution"));
    r.finish();
    return p;
}

inline json distribution_json(const JumpDistribution& d) {
    json j;
    j["variant"] = std::string(d.name());
    if (auto* e = std::get_if<ExponentialPositive>(&d.law())) j["rate"] = e->rate;
    if (auto* e = std::get_if<ExponentialNegative>(&d.law())) j["rate"] = e->rate;
    if (auto* t = std::get_if<TwoPoint>(&d.law())) {
        j["y_lo"] = t->y_lo;
        j["y_hi"] = t->y_hi;
        j["p_hi"] = t->p_hi;
    }
    if (auto* t = std::get_if<Tabulated>(&d.law())) {
        j["y"] = t->y;
        j["density"] = t->density;
    }
    return j;
}

inline json margin_json(const MarginModel& m) {
    json j;
    j["variant"] = std::string(margin_name(m));
    if (auto* d = std::get_if<DifferentialRates>(&m)) j["borrow_rate"] = d->borrow_rate;
    if (auto* s = std::get_if<ShortRebate>(&m)) j["loan_rate"] = s->loan_rate;
    if (auto* p = std::get_if<PiecewiseLinearConcave>(&m)) {
        j["breakpoints"] = p->breakpoints;
        j["slopes"] = p->slopes;
    }
    return j;
}

inline json bound_json(double v) { return std::isinf(v) ? json(nullptr) : json(v); }

}  // namespace detail

inline RunConfig parse_config(const nlohmann::json& j) {
    using detail::Reader;
    RunConfig cfg;
    Reader root(j, "");

    {
        Reader m(root.raw("model"), "model");
        const auto tr = m.has("transform") ? m.string("transform") : std::string("exponential");
        if (tr == "exponential") cfg.model.transform = JumpTransform::exponential;
        else if (tr == "identity") cfg.model.transform = JumpTransform::identity;
        else throw ValidationError("model.transform", "expected 'exponential' or 'identity'");

        Reader g(m.raw("generator"), "model.generator");
        cfg.model.generator = {g.number("lambda0"), g.number("lambda1")};
        g.finish();
        if (!(cfg.model.generator.lambda0 >= 0.0)) throw ValidationError("model.generator.lambda0", "must be >= 0");
        if (!(cfg.model.generator.lambda1 >= 0.0)) throw ValidationError("model.generator.lambda1", "must be >= 0");

        if (m.has("initial_regime")) {
            const auto i0 = m.unsigned_int("initial_regime");
            if (i0 > 1) throw ValidationError("model.initial_regime", "must be 0 or 1");
            cfg.initial_regime = static_cast<int>(i0);
        }

        const auto& regs = m.raw("regimes");
        if (!regs.is_array() || regs.empty() || regs.size() > 2)
            throw ValidationError("model.regimes", "expected an array of 1 or 2 regimes");
        for (std::size_t i = 0; i < regs.size(); ++i)
            cfg.model.regimes[i] = detail::parse_regime(regs[i], "model.regimes[" + std::to_string(i) + "]");
        if (regs.size() == 1) cfg.model.regimes[1] = cfg.model.regimes[0];
        m.finish();
    }
    {
        Reader k(root.raw("constraint"), "constraint");
        cfg.model.K.lower = k.bound("lower", -std::numeric_limits<double>::infinity());
        cfg.model.K.upper = k.bound("upper", std::numeric_limits<double>::infinity());
        k.finish();
        if (cfg.model.K.lower > 0.0) throw ValidationError("constraint.lower", "must be <= 0 (K contains 0)");
        if (cfg.model.K.upper < 0.0) throw ValidationError("constraint.upper", "must be >= 0 (K contains 0)");
    }
    {
        Reader u(root.raw("utility"), "utility");
        const auto kind = u.string("kind");
        if (kind == "log") {
            cfg.utility = Utility::log();
        } else if (kind == "power") {
            const double g = u.number("gamma");
            if (!(g > 0.0 && g < 1.0)) throw ValidationError("utility.gamma", "must lie in (0, 1)");
            cfg.utility = Utility::power(g);
        } else {
            throw ValidationError("utility.kind", "expected 'log' or 'power'");
        }
        u.finish();
    }
    cfg.horizon = root.number_or("horizon", 1.0);
    if (!(cfg.horizon > 0.0)) throw ValidationError("horizon", "must be positive");
    cfg.initial_wealth = root.number_or("initial_wealth", 1.0);
    if (!(cfg.initial_wealth > 0.0)) throw ValidationError("initial_wealth", "must be positive");
    if (root.has("monte_carlo")) {
        Reader mc(root.raw("monte_carlo"), "monte_carlo");
        if (mc.has("paths")) cfg.paths = mc.unsigned_int("paths");
        if (mc.has("seed")) cfg.seed = mc.unsigned_int("seed");
        mc.finish();
        if (cfg.paths < 2) throw ValidationError("monte_carlo.paths", "must be >= 2");
    }
    if (root.has("output_dir")) cfg.output_dir = root.string("output_dir");
    if (root.has("figures")) {
        Reader f(root.raw("figures"), "figures");
        auto& fs = cfg.figures;
        fs.pi_min = f.number_or("pi_min", fs.pi_min);
        fs.pi_max = f.number_or("pi_max", fs.pi_max);
        if (f.has("pi_points")) fs.pi_points = f.unsigned_int("pi_points");
        if (f.has("gammas")) fs.gammas = f.numbers("gammas");
        if (f.has("gamma_points")) fs.gamma_points = f.unsigned_int("gamma_points");
        fs.gamma_max = f.number_or("gamma_max", fs.gamma_max);
        f.finish();
        if (!(fs.pi_max > fs.pi_min)) throw ValidationError("figures.pi_max", "must exceed figures.pi_min");
        if (fs.pi_points < 2) throw ValidationError("figures.pi_points", "must be >= 2");
        if (fs.gamma_points < 2) throw ValidationError("figures.gamma_points", "must be >= 2");
        if (!(fs.gamma_max > 0.0 && fs.gamma_max < 1.0)) throw ValidationError("figures.gamma_max", "must lie in (0, 1)");
        for (std::size_t k = 0; k < fs.gammas.size(); ++k)
            if (!(fs.gammas[k] >= 0.0 && fs.gammas[k] < 1.0))
                throw ValidationError("figures.gammas[" + std::to_string(k) + "]", "must lie in [0, 1)");
    }
    root.finish();
    try {
        cfg.model.validate();
    } catch (const InvalidModel& e) {
        throw ValidationError("model", e.what());
    }
    return cfg;
}

inline RunConfig parse_config_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("<root>", std::string("malformed JSON: ") + e.what());
    }
    return parse_config(j);
}

inline RunConfig load_config(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw ValidationError("<file>", "cannot open config file '" + file + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

inline nlohmann::json to_json(const RunConfig& cfg) {
    using nlohmann::json;
    json regimes = json::array();
    for (const auto& p : cfg.model.regimes)
        regimes.push_back(
            {{"r", p.r}, {"mu", p.mu}, {"margin", detail::margin_json(p.margin)}, {"distribution", detail::distribution_json(p.dist)}});
    json j;
    j["model"] = {{"transform", cfg.model.transform == JumpTransform::exponential ? "exponential" : "identity"},
                  {"generator", {{"lambda0", cfg.model.generator.lambda0}, {"lambda1", cfg.model.generator.lambda1}}},
                  {"initial_regime", cfg.initial_regime},
                  {"regimes", regimes}};
    j["constraint"] = {{"lower", detail::bound_json(cfg.model.K.lower)}, {"upper", detail::bound_json(cfg.model.K.upper)}};
    j["utility"] = cfg.utility.is_log() ? json{{"kind", "log"}} : json{{"kind", "power"}, {"gamma", cfg.utility.gamma()}};
    j["horizon"] = cfg.horizon;
    j["initial_wealth"] = cfg.initial_wealth;
    j["monte_carlo"] = {{"paths", cfg.paths}, {"seed", cfg.seed}};
    if (!cfg.output_dir.empty()) j["output_dir"] = cfg.output_dir;
    const auto& f = cfg.figures;
    j["figures"] = {{"pi_min", f.pi_min},         {"pi_max", f.pi_max},         {"pi_points", f.pi_points},
                    {"gammas", f.gammas},         {"gamma_points", f.gamma_points}, {"gamma_max", f.gamma_max}};
    return j;
}

/// 64-bit FNV-1a of the canonical serialization, as 16 hex digits.
inline std::string config_hash(const RunConfig& cfg) {
    const std::string s = to_json(cfg).dump();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace jumpopt
