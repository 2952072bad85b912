#pragma once

// Experiment configuration in a sectioned key-value format:
//
//   [problem]
//   d = 1
//   r0 = 1        # comments run to the end of the line
//
// Unknown sections and keys are errors. Parsing collects every violation
// before throwing, so a broken file is reported in one go.

#include <charconv>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "harnack/coefficients.hpp"
#include "harnack/errors.hpp"
#include "harnack/format.hpp"

namespace harnack {

class ConfigError : public InvalidArgument {
public:
    explicit ConfigError(std::vector<std::string> problems)
        : InvalidArgument(join(problems)), problems_(std::move(problems)) {}

    const std::vector<std::string>& problems() const noexcept { return problems_; }

private:
    static std::string join(const std::vector<std::string>& v) {
        std::string s = "invalid configuration:";
        for (const auto& p : v) s += "\n  - " + p;
        return s;
    }
    std::vector<std::string> problems_;
};

struct ExperimentConfig {
    struct Problem {
        int d = 1;
        double r0 = 1.0;
        double T = 2.0;
        int m = 100;
        std::optional<double> t0;
        bool operator==(const Problem&) const = default;
    } problem;

    struct System {
        std::string name = "linear_additive";
        std::map<std::string, double> params{{"a", -1.0}, {"c", 0.5}, {"s0", 1.0}};
        bool operator==(const System&) const = default;
    } system;

    struct Constants {
        std::optional<double> k1, k2, k3, k4;
        bool operator==(const Constants&) const = default;
    } constants;

    struct Coupling {
        double theta = 1.0;
        std::optional<double> p;
        std::optional<double> eps;
        double delta_merge = 1e-8;
        std::string measure = "Q";
        bool operator==(const Coupling&) const = default;
    } coupling;

    struct Mc {
        long n = 10000;
        std::uint64_t seed = 1;
        double k_tol = 3.0;
        double k_viol = 6.0;
        double k_eq = 4.0;
        bool operator==(const Mc&) const = default;
    } mc;

    struct Functions {
        std::string f = "quad_cap";
        double C = 100.0;
        bool operator==(const Functions&) const = default;
    } functions;

    struct Initial {
        std::vector<double> xi{1.0};
        std::vector<double> eta{0.0};
        std::optional<std::string> xi_file;
        std::optional<std::string> eta_file;
        bool operator==(const Initial&) const = default;
    } initial;

    struct Bounds {
        int s_grid = 200;
        int eps_grid = 200;
        std::optional<double> t_eval;
        std::optional<double> s;
        std::optional<double> point_gap;
        std::optional<double> seg_gap;
        bool operator==(const Bounds&) const = default;
    } bounds;

    struct LemmaSection {
        std::string id = "integrated_segment_gap";
        std::vector<double> lambda;
        std::vector<double> lambda_cap_fractions;
        std::optional<double> s;
        bool operator==(const LemmaSection&) const = default;
    } lemma;

    struct Audit {
        long n = 10000;
        double slack = 1e-6;
        double half_width = 5.0;
        int m = 8;
        bool operator==(const Audit&) const = default;
    } audit;

    struct Stationary {
        double burn_in = 10.0;
        double spacing = 0.0;
        std::optional<double> ref_variance;
        std::optional<double> ref_autocov;
        double var_tol = 0.05;
        double autocov_tol = 0.10;
        bool operator==(const Stationary&) const = default;
    } stationary;

    struct Output {
        std::string dir = ".";
        int verbosity = 1;
        std::optional<std::string> dump_path;
        bool operator==(const Output&) const = default;
    } output;

    bool operator==(const ExperimentConfig&) const = default;

    // Catalog constants, overridden by the [constants] section.
    AssumptionConstants apply_overrides(AssumptionConstants k) const {
        if (constants.k1) k.k1 = *constants.k1;
        if (constants.k2) k.k2 = *constants.k2;
        if (constants.k3) k.k3 = *constants.k3;
        if (constants.k4) k.k4 = *constants.k4;
        return k;
    }
};

namespace detail {

template <class Int>
Int parse_integer(std::string_view text) {
    text = trim(text);
    Int v{};
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size() || text.empty())
        throw InvalidArgument("not an integer: '" + std::string(text) + "'");
    return v;
}

inline std::vector<double> parse_list(std::string_view text) {
    std::vector<double> out;
    std::string s(text);
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(parse_double(cell));
    if (out.empty()) throw InvalidArgument("empty list");
    return out;
}

inline std::string render_list(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format_double(v[i]);
    return s;
}

using Cfg = ExperimentConfig;

struct Field {
    std::function<void(Cfg&, std::string_view)> set;
    std::function<std::optional<std::string>(const Cfg&)> get;
};

template <class T>
Field real(T Cfg::*section, double T::*member) {
    return {[=](Cfg& c, std::string_view v) { (c.*section).*member = parse_double(v); },
            [=](const Cfg& c) -> std::optional<std::string> { return format_double((c.*section).*member); }};
}

template <class T>
Field opt_real(T Cfg::*section, std::optional<double> T::*member) {
    return {[=](Cfg& c, std::string_view v) { (c.*section).*member = parse_double(v); },
            [=](const Cfg& c) -> std::optional<std::string> {
                const auto& o = (c.*section).*member;
                if (!o) return std::nullopt;
                return format_double(*o);
            }};
}

template <class T, class Int>
Field integer(T Cfg::*section, Int T::*member) {
    return {[=](Cfg& c, std::string_view v) { (c.*section).*member = parse_integer<Int>(v); },
            [=](const Cfg& c) -> std::optional<std::string> { return std::to_string((c.*section).*member); }};
}

template <class T>
Field text(T Cfg::*section, std::string T::*member) {
    return {[=](Cfg& c, std::string_view v) { (c.*section).*member = std::string(trim(v)); },
            [=](const Cfg& c) -> std::optional<std::string> { return (c.*section).*member; }};
}

template <class T>
Field opt_text(T Cfg::*section, std::optional<std::string> T::*member) {
    return {[=](Cfg& c, std::string_view v) { (c.*section).*member = std::string(trim(v)); },
            [=](const Cfg& c) { return (c.*section).*member; }};
}

template <class T>
Field list(T Cfg::*section, std::vector<double> T::*member, bool allow_empty) {
    return {[=](Cfg& c, std::string_view v) { (c.*section).*member = parse_list(v); },
            [=](const Cfg& c) -> std::optional<std::string> {
                const auto& l = (c.*section).*member;
                if (l.empty() && allow_empty) return std::nullopt;
                return render_list(l);
            }};
}

// Ordered table of every recognized (section, key). [system] also accepts
// the parameters of the named system, handled separately.
inline const std::vector<std::pair<std::string, std::vector<std::pair<std::string, Field>>>>& schema() {
    static const std::vector<std::pair<std::string, std::vector<std::pair<std::string, Field>>>> table{
        {"problem",
         {{"d", integer(&Cfg::problem, &Cfg::Problem::d)},
          {"r0", real(&Cfg::problem, &Cfg::Problem::r0)},
          {"T", real(&Cfg::problem, &Cfg::Problem::T)},
          {"m", integer(&Cfg::problem, &Cfg::Problem::m)},
          {"t0", opt_real(&Cfg::problem, &Cfg::Problem::t0)}}},
        {"system", {{"name", text(&Cfg::system, &Cfg::System::name)}}},
        {"constants",
         {{"k1", opt_real(&Cfg::constants, &Cfg::Constants::k1)},
          {"k2", opt_real(&Cfg::constants, &Cfg::Constants::k2)},
          {"k3", opt_real(&Cfg::constants, &Cfg::Constants::k3)},
          {"k4", opt_real(&Cfg::constants, &Cfg::Constants::k4)}}},
        {"coupling",
         {{"theta", real(&Cfg::coupling, &Cfg::Coupling::theta)},
          {"p", opt_real(&Cfg::coupling, &Cfg::Coupling::p)},
          {"eps", opt_real(&Cfg::coupling, &Cfg::Coupling::eps)},
          {"delta_merge", real(&Cfg::coupling, &Cfg::Coupling::delta_merge)},
          {"measure", text(&Cfg::coupling, &Cfg::Coupling::measure)}}},
        {"mc",
         {{"n", integer(&Cfg::mc, &Cfg::Mc::n)},
          {"seed", integer(&Cfg::mc, &Cfg::Mc::seed)},
          {"k_tol", real(&Cfg::mc, &Cfg::Mc::k_tol)},
          {"k_viol", real(&Cfg::mc, &Cfg::Mc::k_viol)},
          {"k_eq", real(&Cfg::mc, &Cfg::Mc::k_eq)}}},
        {"functions",
         {{"f", text(&Cfg::functions, &Cfg::Functions::f)}, {"C", real(&Cfg::functions, &Cfg::Functions::C)}}},
        {"initial",
         {{"xi", list(&Cfg::initial, &Cfg::Initial::xi, false)},
          {"eta", list(&Cfg::initial, &Cfg::Initial::eta, false)},
          {"xi_file", opt_text(&Cfg::initial, &Cfg::Initial::xi_file)},
          {"eta_file", opt_text(&Cfg::initial, &Cfg::Initial::eta_file)}}},
        {"bounds",
         {{"s_grid", integer(&Cfg::bounds, &Cfg::Bounds::s_grid)},
          {"eps_grid", integer(&Cfg::bounds, &Cfg::Bounds::eps_grid)},
          {"t_eval", opt_real(&Cfg::bounds, &Cfg::Bounds::t_eval)},
          {"s", opt_real(&Cfg::bounds, &Cfg::Bounds::s)},
          {"point_gap", opt_real(&Cfg::bounds, &Cfg::Bounds::point_gap)},
          {"seg_gap", opt_real(&Cfg::bounds, &Cfg::Bounds::seg_gap)}}},
        {"lemma",
         {{"id", text(&Cfg::lemma, &Cfg::LemmaSection::id)},
          {"lambda", list(&Cfg::lemma, &Cfg::LemmaSection::lambda, true)},
          {"lambda_cap_fractions", list(&Cfg::lemma, &Cfg::LemmaSection::lambda_cap_fractions, true)},
          {"s", opt_real(&Cfg::lemma, &Cfg::LemmaSection::s)}}},
        {"audit",
         {{"n", integer(&Cfg::audit, &Cfg::Audit::n)},
          {"slack", real(&Cfg::audit, &Cfg::Audit::slack)},
          {"half_width", real(&Cfg::audit, &Cfg::Audit::half_width)},
          {"m", integer(&Cfg::audit, &Cfg::Audit::m)}}},
        {"stationary",
         {{"burn_in", real(&Cfg::stationary, &Cfg::Stationary::burn_in)},
          {"spacing", real(&Cfg::stationary, &Cfg::Stationary::spacing)},
          {"ref_variance", opt_real(&Cfg::stationary, &Cfg::Stationary::ref_variance)},
          {"ref_autocov", opt_real(&Cfg::stationary, &Cfg::Stationary::ref_autocov)},
          {"var_tol", real(&Cfg::stationary, &Cfg::Stationary::var_tol)},
          {"autocov_tol", real(&Cfg::stationary, &Cfg::Stationary::autocov_tol)}}},
        {"output",
         {{"dir", text(&Cfg::output, &Cfg::Output::dir)},
          {"verbosity", integer(&Cfg::output, &Cfg::Output::verbosity)},
          {"dump_path", opt_text(&Cfg::output, &Cfg::Output::dump_path)}}},
    };
    return table;
}

inline const Field* find_field(const std::string& section, const std::string& key) {
    for (const auto& [name, fields] : schema()) {
        if (name != section) continue;
        for (const auto& [k, f] : fields)
            if (k == key) return &f;
    }
    return nullptr;
}

inline bool known_section(const std::string& section) {
    for (const auto& entry : schema())
        if (entry.first == section) return true;
    return false;
}

inline std::optional<std::vector<std::string>> system_parameters(const std::string& name) {
    if (const auto it = system_registry<1>().find(name); it != system_registry<1>().end())
        return it->second.parameters;
    if (const auto it = system_registry<Eigen::Dynamic>().find(name); it != system_registry<Eigen::Dynamic>().end())
        return it->second.parameters;
    return std::nullopt;
}

inline bool on_grid(double t, double h) {
    const double k = std::round(t / h);
    return std::abs(k * h - t) <= 1e-12 * std::max(1.0, std::abs(t));
}

} // namespace detail

inline const std::vector<std::string>& known_commands() {
    static const std::vector<std::string> c{"audit",   "simulate",    "couple",        "bounds",
                                            "entropy", "log-harnack", "power-harnack", "stationary"};
    return c;
}

// Checks that need the whole config. command (if given) adds the checks of
// that subcommand.
inline std::vector<std::string> validate_config(const ExperimentConfig& c, const std::string& command = {}) {
    std::vector<std::string> v;
    const auto& p = c.problem;
    if (p.d < 1) v.push_back("problem.d must be a positive integer");
    if (!(p.r0 > 0.0) || !std::isfinite(p.r0)) v.push_back("problem.r0 must be positive");
    if (p.m < 1) v.push_back("problem.m must be a positive integer");
    if (!(p.T > 0.0) || !std::isfinite(p.T)) v.push_back("problem.T must be positive");
    const bool grid_ok = p.m >= 1 && p.r0 > 0.0 && std::isfinite(p.r0);
    const double h = grid_ok ? p.r0 / p.m : 0.0;
    if (grid_ok && p.T > 0.0 && !detail::on_grid(p.T, h))
        v.push_back("problem.T must be an integer multiple of h = r0/m = " + format_double(h));
    if (p.t0) {
        if (!(*p.t0 > 0.0)) v.push_back("problem.t0 must be positive");
        else if (grid_ok && !detail::on_grid(*p.t0, h)) v.push_back("problem.t0 must lie on the grid h = r0/m");
        if (*p.t0 > p.T - p.r0 + 1e-12 * std::abs(p.T))
            v.push_back("problem.t0 must satisfy t0 <= T - r0 (got t0 = " + format_double(*p.t0) +
                        ", T - r0 = " + format_double(p.T - p.r0) + ")");
    }

    if (const auto params = detail::system_parameters(c.system.name)) {
        for (const auto& key : *params)
            if (!c.system.params.count(key)) v.push_back("system." + key + " is required for " + c.system.name);
    } else {
        v.push_back("system.name: unknown system '" + c.system.name + "'");
    }

    const auto& cp = c.coupling;
    if (!(cp.theta > 0.0 && cp.theta < 2.0)) v.push_back("coupling.theta must lie in (0, 2)");
    if (cp.eps && !(*cp.eps > 0.0 && *cp.eps < 1.0)) v.push_back("coupling.eps must lie in (0, 1)");
    if (cp.p && !(*cp.p > 1.0)) v.push_back("coupling.p must exceed 1");
    if (!(cp.delta_merge >= 0.0)) v.push_back("coupling.delta_merge must be nonnegative");
    if (cp.measure != "P" && cp.measure != "Q") v.push_back("coupling.measure must be P or Q");

    if (c.mc.n < 2) v.push_back("mc.n must be at least 2");
    if (!(c.mc.k_tol > 0.0) || !(c.mc.k_viol >= c.mc.k_tol)) v.push_back("mc: need 0 < k_tol <= k_viol");
    if (!(c.mc.k_eq > 0.0)) v.push_back("mc.k_eq must be positive");
    if (!(c.functions.C >= 0.0) || !std::isfinite(c.functions.C)) v.push_back("functions.C must be finite and >= 0");

    const auto d = static_cast<std::size_t>(std::max(p.d, 1));
    if (!c.initial.xi_file && c.initial.xi.size() != 1 && c.initial.xi.size() != d)
        v.push_back("initial.xi needs 1 or d values");
    if (!c.initial.eta_file && c.initial.eta.size() != 1 && c.initial.eta.size() != d)
        v.push_back("initial.eta needs 1 or d values");

    if (c.bounds.s_grid < 3 || c.bounds.eps_grid < 3) v.push_back("bounds grids need at least 3 points");
    if (c.audit.n < 1) v.push_back("audit.n must be positive");
    if (c.audit.m < 1) v.push_back("audit.m must be positive");
    if (!(c.audit.half_width > 0.0) || !std::isfinite(c.audit.half_width))
        v.push_back("audit.half_width must be positive and finite");
    if (!(c.stationary.burn_in >= 0.0)) v.push_back("stationary.burn_in must be nonnegative");
    if (c.stationary.spacing != 0.0 && c.stationary.spacing < p.r0)
        v.push_back("stationary.spacing must be 0 (default 2 r0) or at least r0");

    if (!command.empty()) {
        if (std::find(known_commands().begin(), known_commands().end(), command) == known_commands().end())
            v.push_back("unknown command '" + command + "'");
        const bool needs_long_horizon = command == "log-harnack" || command == "power-harnack" || command == "bounds";
        if (needs_long_horizon && !(p.T > p.r0))
            v.push_back(command + ": the inequality only holds for T > r0 (got T = " + format_double(p.T) +
                        ", r0 = " + format_double(p.r0) + ")");
        if ((command == "couple" || command == "entropy") && !p.t0)
            v.push_back(command + " needs problem.t0");
        if (command == "power-harnack" && !cp.p) v.push_back("power-harnack needs coupling.p");
        if (command == "entropy" && !c.lemma.lambda.empty() && !c.lemma.lambda_cap_fractions.empty())
            v.push_back("lemma: give either lambda or lambda_cap_fractions, not both");
    }
    return v;
}

inline ExperimentConfig parse_config(std::string_view text, const std::string& command = {}) {
    ExperimentConfig cfg;
    const auto default_system = cfg.system;
    cfg.system.params.clear();
    bool params_given = false;
    std::vector<std::string> problems;
    std::string section;
    std::map<std::string, int> seen;
    std::istringstream in{std::string(text)};
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const auto where = "line " + std::to_string(lineno) + ": ";
        std::string_view line = raw;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                problems.push_back(where + "malformed section header");
                continue;
            }
            section = std::string(trim(line.substr(1, line.size() - 2)));
            if (!detail::known_section(section)) problems.push_back(where + "unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            problems.push_back(where + "expected 'key = value'");
            continue;
        }
        const std::string key(trim(line.substr(0, eq)));
        const std::string_view value = trim(line.substr(eq + 1));
        if (section.empty()) {
            problems.push_back(where + "key '" + key + "' outside any section");
            continue;
        }
        if (!detail::known_section(section)) continue;
        const std::string full = section + "." + key;
        if (seen[full]++) problems.push_back(where + "duplicate key " + full);
        try {
            if (const auto* f = detail::find_field(section, key)) {
                f->set(cfg, value);
            } else if (section == "system") {
                params_given = true;
                cfg.system.params[key] = parse_double(value);
            } else {
                problems.push_back(where + "unknown key '" + key + "' in [" + section + "]");
            }
        } catch (const InvalidArgument& e) {
            problems.push_back(where + full + ": " + e.what());
        }
    }
    // The default system keeps its default parameters unless any are given.
    if (!params_given && cfg.system.name == default_system.name) cfg.system.params = default_system.params;
    // System parameters can only be checked once the name is known.
    if (const auto params = detail::system_parameters(cfg.system.name)) {
        for (const auto& [key, value] : cfg.system.params) {
            (void)value;
            if (std::find(params->begin(), params->end(), key) == params->end())
                problems.push_back("unknown key '" + key + "' in [system] for " + cfg.system.name);
        }
    }
    for (auto& p : validate_config(cfg, command)) problems.push_back(std::move(p));
    if (!problems.empty()) throw ConfigError(std::move(problems));
    return cfg;
}

inline std::string render_config(const ExperimentConfig& cfg) {
    std::string out;
    for (const auto& [section, fields] : detail::schema()) {
        out += "[" + section + "]\n";
        for (const auto& [key, field] : fields)
            if (const auto v = field.get(cfg)) out += key + " = " + *v + "\n";
        if (section == "system")
            for (const auto& [key, value] : cfg.system.params) out += key + " = " + format_double(value) + "\n";
        out += "\n";
    }
    return out;
}

} // namespace harnack
