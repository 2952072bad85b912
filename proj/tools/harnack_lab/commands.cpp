#include "commands.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "harnack/harnack.hpp"

#ifndef HARNACK_VERSION
#define HARNACK_VERSION "unknown"
#endif

namespace harnack::cli {

const char* version() { return HARNACK_VERSION; }

namespace {

namespace fs = std::filesystem;
using Opt = std::optional<double>;

struct Row {
    std::string claim;
    Opt lhs, lhs_se, rhs, rhs_se, bound, margin_se;
    std::string verdict = "info";
    long n = 0;
    std::uint64_t seed = 0;
    double h = 0.0;
    long failures = 0;
};

std::string cell(const Opt& v) { return v ? format_double(*v) : std::string(); }

void write_csv(std::ostream& os, const std::vector<Row>& rows) {
    os << "claim,lhs,lhs_se,rhs,rhs_se,bound,margin_se,verdict,n,seed,h,failures,version\n";
    for (const auto& r : rows) {
        os << r.claim << ',' << cell(r.lhs) << ',' << cell(r.lhs_se) << ',' << cell(r.rhs) << ',' << cell(r.rhs_se)
           << ',' << cell(r.bound) << ',' << cell(r.margin_se) << ',' << r.verdict << ',' << r.n << ',' << r.seed << ','
           << format_double(r.h) << ',' << r.failures << ',' << version() << '\n';
    }
}

void print_rows(std::ostream& os, const std::vector<Row>& rows) {
    for (const auto& r : rows) {
        os << r.claim << ":";
        if (r.lhs) os << " lhs=" << format_double(*r.lhs);
        if (r.lhs_se) os << " (se " << format_double(*r.lhs_se) << ")";
        if (r.rhs) os << " rhs=" << format_double(*r.rhs);
        if (r.rhs_se) os << " (se " << format_double(*r.rhs_se) << ")";
        if (r.bound) os << " bound=" << format_double(*r.bound);
        if (r.margin_se) os << " margin=" << format_double(*r.margin_se) << " SE";
        if (r.failures) os << " failures=" << r.failures;
        os << " [" << r.verdict << "]\n";
    }
}

int exit_code(const std::vector<Row>& rows) {
    bool inconclusive = false;
    for (const auto& r : rows) {
        if (r.verdict == "violated") return kViolated;
        if (r.verdict == "inconclusive") inconclusive = true;
    }
    return inconclusive ? kInconclusive : kHolds;
}

struct Context {
    ExperimentConfig cfg;
    std::string command;
    fs::path config_dir;
    Execution exec;
    std::ostream* out = nullptr;

    double h() const { return cfg.problem.r0 / cfg.problem.m; }
    Tolerances tol() const { return {cfg.mc.k_tol, cfg.mc.k_viol, 1e-3}; }

    fs::path resolve_output(const std::string& name) const {
        fs::path p(name);
        return p.is_absolute() ? p : fs::path(cfg.output.dir) / p;
    }
};

Row base_row(const Context& ctx, std::string claim) {
    Row r;
    r.claim = std::move(claim);
    r.n = ctx.cfg.mc.n;
    r.seed = ctx.cfg.mc.seed;
    r.h = ctx.h();
    return r;
}

Row info_row(const Context& ctx, std::string claim, double value) {
    Row r = base_row(ctx, std::move(claim));
    r.bound = value;
    return r;
}

Row verdict_row(const Context& ctx, const VerdictReport& v) {
    Row r = base_row(ctx, v.claim);
    r.lhs = v.lhs.mean;
    r.lhs_se = v.lhs.std_error;
    r.rhs = v.rhs.mean;
    r.rhs_se = v.rhs.std_error;
    r.bound = v.bound;
    r.margin_se = v.margin_se;
    r.verdict = to_string(v.verdict);
    r.n = v.lhs.n;
    r.failures = v.lhs.failures;
    return r;
}

template <int Dim>
SegmentPath<Dim> initial_segment(const Context& ctx, const std::vector<double>& values,
                                 const std::optional<std::string>& file) {
    const auto& p = ctx.cfg.problem;
    if (file) {
        fs::path path(*file);
        if (path.is_relative()) path = ctx.config_dir / path;
        std::ifstream in(path);
        if (!in) throw InvalidArgument("cannot open initial segment file " + path.string());
        auto seg = read_segment_csv<Dim>(in);
        if (seg.m() != p.m || std::abs(seg.r0() - p.r0) > 1e-9 * p.r0 || seg.dim() != p.d)
            throw InvalidArgument("initial segment file " + path.string() + " does not match (d, r0, m)");
        return seg;
    }
    Vector<Dim> v(p.d);
    for (int j = 0; j < p.d; ++j) v(j) = values.size() == 1 ? values[0] : values[static_cast<std::size_t>(j)];
    return SegmentPath<Dim>::constant(p.r0, p.m, v);
}

template <int Dim>
struct Setup {
    CoefficientSet<Dim> coeffs;
    SegmentPath<Dim> xi, eta;
    GridSpec grid;
    GapPair gaps;
};

template <int Dim>
Setup<Dim> make_setup(const Context& ctx) {
    const auto& c = ctx.cfg;
    Setup<Dim> s{builtin_system<Dim>(c.system.name, c.system.params, c.problem.d),
                 initial_segment<Dim>(ctx, c.initial.xi, c.initial.xi_file),
                 initial_segment<Dim>(ctx, c.initial.eta, c.initial.eta_file),
                 GridSpec(c.problem.r0, c.problem.T, c.problem.m),
                 {}};
    s.coeffs.constants = c.apply_overrides(s.coeffs.constants);
    s.coeffs.constants.validate();
    s.gaps = gaps_of(s.xi, s.eta);
    if (c.bounds.point_gap) s.gaps.point_gap = *c.bounds.point_gap;
    if (c.bounds.seg_gap) s.gaps.seg_gap = *c.bounds.seg_gap;
    return s;
}

template <int Dim>
GammaSchedule schedule(const Context& ctx, const Setup<Dim>& s) {
    GammaSchedule g{ctx.cfg.coupling.theta, s.coeffs.constants.k4, *ctx.cfg.problem.t0};
    g.validate();
    return g;
}

void dump(const Context& ctx, const std::function<void(std::ostream&)>& writer) {
    if (!ctx.cfg.output.dump_path) return;
    const auto path = ctx.resolve_output(*ctx.cfg.output.dump_path);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write " + path.string());
    writer(f);
}

// ---------------------------------------------------------------------------

template <int Dim>
std::vector<Row> cmd_audit(const Context& ctx) {
    const auto s = make_setup<Dim>(ctx);
    const auto& a = ctx.cfg.audit;
    AuditBox box{ctx.cfg.problem.T, a.half_width, ctx.cfg.problem.r0, a.m};
    const auto rep = audit_assumptions<Dim>(s.coeffs, box, a.n, ctx.cfg.mc.seed, a.slack);
    std::vector<Row> rows;
    for (const auto& c : rep.conditions) {
        Row r = base_row(ctx, "audit:" + c.condition);
        r.lhs = c.empirical_max;
        r.rhs = c.declared;
        r.bound = c.declared;
        r.n = c.samples;
        r.verdict = c.pass ? "holds" : "violated";
        if (ctx.cfg.output.verbosity > 0 && !c.note.empty())
            *ctx.out << c.condition << " worst at " << c.note << "\n";
        rows.push_back(r);
    }
    if (ctx.cfg.output.verbosity > 0) *ctx.out << "note: " << AuditReport::caveat << "\n";
    return rows;
}

template <int Dim>
std::vector<Row> cmd_simulate(const Context& ctx) {
    const auto s = make_setup<Dim>(ctx);
    const auto f = make_test_function<Dim>(ctx.cfg.functions.f, ctx.cfg.functions.C);
    const auto est = estimate_PT_f<Dim>(s.coeffs, s.xi, f, s.grid, ctx.cfg.mc.n, ctx.cfg.mc.seed, ctx.exec);
    Row r = base_row(ctx, "PT_f");
    r.lhs = est.mean;
    r.lhs_se = est.std_error;
    dump(ctx, [&](std::ostream& os) {
        write_trajectory_csv(os, simulate_path<Dim>(s.coeffs, s.xi, s.grid, ctx.cfg.mc.seed, 0));
    });
    return {r};
}

template <int Dim>
std::vector<Row> cmd_couple(const Context& ctx) {
    const auto s = make_setup<Dim>(ctx);
    const CouplingPlan plan(schedule(ctx, s), s.grid);
    CouplingOptions opts;
    opts.measure = ctx.cfg.coupling.measure == "P" ? Measure::P : Measure::Q;
    opts.delta_merge = ctx.cfg.coupling.delta_merge;
    const long n = ctx.cfg.mc.n;
    const auto seed = ctx.cfg.mc.seed;

    struct PathResult {
        double phi_sq = 0.0, weight = 0.0, log_weight = 0.0, tau = 0.0;
        bool merged = false;
    };
    std::vector<PathResult> res(static_cast<std::size_t>(n));
    parallel_for(n, ctx.exec, [&](long i) {
        const auto tr = simulate_coupled<Dim>(s.coeffs, s.xi, s.eta, plan, seed, static_cast<std::uint64_t>(i), opts);
        auto& r = res[static_cast<std::size_t>(i)];
        r.phi_sq = tr.phi_sq_integral();
        r.log_weight = tr.final_log_weight();
        r.weight = std::exp(r.log_weight);
        r.merged = tr.merged;
        r.tau = tr.tau.value_or(0.0);
    });
    std::vector<double> phi, w, lw, tau;
    long unmerged = 0;
    for (const auto& r : res) {
        phi.push_back(r.phi_sq);
        w.push_back(r.weight);
        lw.push_back(r.log_weight);
        if (r.merged)
            tau.push_back(r.tau);
        else
            ++unmerged;
    }
    const double frac = static_cast<double>(unmerged) / static_cast<double>(n);

    std::vector<Row> rows;
    Row m = base_row(ctx, "unmerged_fraction");
    m.lhs = frac;
    m.rhs = 1e-3;
    m.bound = 1e-3;
    m.failures = unmerged;
    m.verdict = frac <= 1e-3 ? "holds" : "violated";
    rows.push_back(m);

    if (opts.measure == Measure::P) {
        auto v = martingale_verdict(MCEstimate::from_samples(w, seed, unmerged), ctx.cfg.mc.k_eq, ctx.tol());
        rows.push_back(verdict_row(ctx, v));
    }
    const auto phi_est = MCEstimate::from_samples(phi, seed, unmerged);
    Row p = base_row(ctx, "phi_sq_integral");
    p.lhs = phi_est.mean;
    p.lhs_se = phi_est.std_error;
    p.failures = unmerged;
    rows.push_back(p);
    const auto lw_est = MCEstimate::from_samples(lw, seed, unmerged);
    Row l = base_row(ctx, "log_weight");
    l.lhs = lw_est.mean;
    l.lhs_se = lw_est.std_error;
    rows.push_back(l);
    if (tau.size() >= 2) {
        const auto t = MCEstimate::from_samples(tau, seed);
        Row tr = base_row(ctx, "coupling_time");
        tr.lhs = t.mean;
        tr.lhs_se = t.std_error;
        tr.bound = plan.schedule.t0;
        tr.n = t.n;
        rows.push_back(tr);
    }
    dump(ctx, [&](std::ostream& os) {
        CouplingOptions o = opts;
        o.record_paths = true;
        write_coupled_csv(os, simulate_coupled<Dim>(s.coeffs, s.xi, s.eta, plan, seed, 0, o), plan);
    });
    return rows;
}

template <int Dim>
std::vector<Row> cmd_bounds(const Context& ctx) {
    const auto s = make_setup<Dim>(ctx);
    const auto& c = ctx.cfg;
    const auto& k = s.coeffs.constants;
    const double r0 = c.problem.r0;
    const double T = c.problem.T;
    std::vector<Row> rows;
    auto& os = *ctx.out;
    auto report = [&](const BoundReport& b) {
        rows.push_back(info_row(ctx, b.bound, b.value));
        rows.push_back(info_row(ctx, b.bound + ":s_star", b.s_star));
        if (b.eps_star) rows.push_back(info_row(ctx, b.bound + ":eps_star", *b.eps_star));
        for (const auto& t : b.terms) rows.push_back(info_row(ctx, b.bound + ":" + t.name, t.value));
        if (c.output.verbosity > 0) {
            os << b.bound << " = " << format_double(b.value) << " at s = " << format_double(b.s_star);
            if (b.eps_star) os << ", eps = " << format_double(*b.eps_star);
            os << "\n";
            for (const auto& t : b.terms) os << "  " << t.name << ": " << format_double(t.value) << "\n";
            if (!b.note.empty()) os << "  note: " << b.note << "\n";
        }
    };
    report(bound_H_T(k, s.gaps, T, r0, c.bounds.s_grid));
    if (c.bounds.s) rows.push_back(info_row(ctx, "H_T@s", h_t_at(k, s.gaps, r0, *c.bounds.s)));
    if (c.problem.t0) {
        const double t0 = *c.problem.t0;
        rows.push_back(info_row(ctx, "entropy_horizon", bound_entropy_horizon(k, t0, r0, s.gaps, c.coupling.theta)));
        if (c.bounds.t_eval)
            rows.push_back(info_row(ctx, "entropy_coupling",
                                    bound_entropy_coupling(k, c.coupling.theta, *c.bounds.t_eval, t0, s.gaps)));
    }
    if (c.coupling.p) {
        const double p = *c.coupling.p;
        rows.push_back(info_row(ctx, "lambda_p", lambda_p(p)));
        rows.push_back(info_row(ctx, "Theta_p:sup", theta_set_sup(p, k)));
        report(bound_Phi_p(p, T, k, s.gaps, r0, c.bounds.eps_grid, c.bounds.s_grid));
    }
    return rows;
}

// Lemma checks share the coupled paths of the entropy run.
struct LemmaCheck {
    Lemma id;
    double lambda = 0.0;
    LemmaRhs rhs;
    long step = 0;
};

template <int Dim>
std::vector<LemmaCheck> lemma_checks(const Context& ctx, const Setup<Dim>& s) {
    const auto& c = ctx.cfg;
    std::vector<LemmaCheck> out;
    if (c.lemma.lambda.empty() && c.lemma.lambda_cap_fractions.empty()) return out;
    const Lemma id = parse_lemma(c.lemma.id);
    const double t0 = *c.problem.t0;
    const double sv = c.lemma.s.value_or(t0);
    detail::require(sv > 0.0 && sv <= t0 * (1.0 + 1e-12), "lemma.s must lie in (0, t0]");
    const auto step = s.grid.index_of(sv);
    detail::require(step.has_value(), "lemma.s must lie on the grid");
    LemmaParams prm;
    prm.constants = s.coeffs.constants;
    prm.s = sv;
    prm.t0 = t0;
    prm.gaps = s.gaps;
    if (id == Lemma::weighted_point_gap) {
        detail::require(c.coupling.eps.has_value(), "weighted_point_gap needs coupling.eps");
        prm.eps = *c.coupling.eps;
        detail::require(std::abs(c.coupling.theta - 2.0 * (1.0 - prm.eps)) < 1e-12,
                        "weighted_point_gap needs coupling.theta = 2(1 - eps)");
    }
    std::vector<double> lambdas = c.lemma.lambda;
    for (double frac : c.lemma.lambda_cap_fractions) {
        double cap = 0.0;
        if (id == Lemma::integrated_segment_gap)
            cap = integrated_gap_lambda_cap(prm.constants, sv);
        else if (id == Lemma::weighted_point_gap)
            cap = weighted_gap_lambda_cap(prm.constants, prm.eps);
        else
            throw InvalidArgument("terminal_segment_gap has no lambda cap; give lemma.lambda");
        detail::require(std::isfinite(cap), "the lambda cap is infinite for K2 = 0; give lemma.lambda");
        lambdas.push_back(frac * cap);
    }
    for (double lam : lambdas) {
        prm.lambda = lam;
        out.push_back({id, lam, lemma_rhs(id, prm), *step});
    }
    return out;
}

template <int Dim>
std::vector<Row> cmd_entropy(const Context& ctx) {
    const auto s = make_setup<Dim>(ctx);
    const auto& c = ctx.cfg;
    const auto sched = schedule(ctx, s);
    const CouplingPlan plan(sched, s.grid);
    const auto checks = lemma_checks<Dim>(ctx, s);
    CouplingOptions opts;
    opts.measure = Measure::Q;
    opts.delta_merge = c.coupling.delta_merge;
    opts.track_gaps = !checks.empty();
    std::optional<long> t_step;
    if (c.bounds.t_eval) {
        detail::require(*c.bounds.t_eval > 0.0 && *c.bounds.t_eval <= sched.t0 * (1.0 + 1e-12),
                        "bounds.t_eval must lie in (0, t0]");
        t_step = s.grid.index_of(*c.bounds.t_eval);
        detail::require(t_step.has_value(), "bounds.t_eval must lie on the grid");
    }

    const long n = c.mc.n;
    const std::size_t width = 2 + 2 * checks.size();
    std::vector<double> vals(static_cast<std::size_t>(n) * width);
    std::vector<char> merged(static_cast<std::size_t>(n));
    parallel_for(n, ctx.exec, [&](long i) {
        const auto tr = simulate_coupled<Dim>(s.coeffs, s.xi, s.eta, plan, c.mc.seed, static_cast<std::uint64_t>(i),
                                              opts);
        double* v = &vals[static_cast<std::size_t>(i) * width];
        v[0] = 0.5 * tr.phi_sq_integral();
        v[1] = t_step ? 0.5 * tr.phi_sq_cum[static_cast<std::size_t>(*t_step)] : 0.0;
        for (std::size_t j = 0; j < checks.size(); ++j) {
            const auto& ch = checks[j];
            const auto k = static_cast<std::size_t>(ch.step);
            double lhs_exp = 0.0;
            switch (ch.id) {
            case Lemma::integrated_segment_gap: lhs_exp = ch.lambda * tr.seg_gap_sq_cum[k]; break;
            case Lemma::terminal_segment_gap: lhs_exp = ch.lambda * tr.seg_gap_sq[k]; break;
            case Lemma::weighted_point_gap: lhs_exp = ch.lambda * tr.gap_over_gamma_cum[k]; break;
            }
            v[2 + 2 * j] = lhs_exp;
            v[3 + 2 * j] = ch.rhs.inner_multiplier * tr.seg_gap_sq_cum[k];
        }
        merged[static_cast<std::size_t>(i)] = tr.merged;
    });
    const long unmerged = static_cast<long>(std::count(merged.begin(), merged.end(), 0));
    const double frac = static_cast<double>(unmerged) / static_cast<double>(n);
    auto column = [&](std::size_t j) {
        std::vector<double> col(static_cast<std::size_t>(n));
        for (long i = 0; i < n; ++i) col[static_cast<std::size_t>(i)] = vals[static_cast<std::size_t>(i) * width + j];
        return col;
    };

    std::vector<Row> rows;
    const auto& k = s.coeffs.constants;
    const auto ent = MCEstimate::from_samples(column(0), c.mc.seed, unmerged);
    const double horizon_bound = bound_entropy_horizon(k, sched.t0, c.problem.r0, s.gaps, sched.theta);
    rows.push_back(verdict_row(
        ctx, make_verdict("entropy", ent, MCEstimate::exact(horizon_bound), horizon_bound, ctx.tol(), frac)));
    if (t_step) {
        const auto e = MCEstimate::from_samples(column(1), c.mc.seed, unmerged);
        const double b = bound_entropy_coupling(k, sched.theta, *c.bounds.t_eval, sched.t0, s.gaps);
        rows.push_back(verdict_row(ctx, make_verdict("entropy@t=" + format_double(*c.bounds.t_eval), e,
                                                     MCEstimate::exact(b), b, ctx.tol(), frac)));
    }
    for (std::size_t j = 0; j < checks.size(); ++j) {
        const auto& ch = checks[j];
        auto exps = [&](std::size_t col, double mult) {
            auto v = column(col);
            const double worst = *std::max_element(v.begin(), v.end());
            if (worst > 709.0)
                throw Error("exponent overflow: lambda = " + format_double(mult) + " gives exponent " +
                            format_double(worst));
            for (auto& x : v) x = std::exp(x);
            return MCEstimate::from_samples(v, c.mc.seed, unmerged);
        };
        const auto lhs = exps(2 + 2 * j, ch.lambda);
        MCEstimate rhs = MCEstimate::exact(ch.rhs.prefactor);
        if (ch.rhs.inner_multiplier != 0.0) {
            const auto inner = exps(3 + 2 * j, ch.rhs.inner_multiplier);
            const double q = ch.rhs.inner_power;
            rhs = inner;
            rhs.mean = ch.rhs.prefactor * std::pow(inner.mean, q);
            rhs.std_error = ch.rhs.prefactor * q * std::pow(inner.mean, q - 1.0) * inner.std_error;
        }
        const std::string claim = "lemma:" + to_string(ch.id) + "@lambda=" + format_double(ch.lambda);
        rows.push_back(verdict_row(ctx, make_verdict(claim, lhs, rhs, ch.rhs.prefactor, ctx.tol(), frac)));
    }
    return rows;
}

template <int Dim>
std::vector<Row> cmd_log_harnack(const Context& ctx) {
    const auto s = make_setup<Dim>(ctx);
    const auto& c = ctx.cfg;
    const auto f = make_test_function<Dim>(c.functions.f, c.functions.C);
    const auto v = check_log_harnack<Dim>(s.coeffs, s.xi, s.eta, f, s.grid, c.mc.n, c.mc.seed, ctx.exec, ctx.tol(),
                                          c.bounds.s, c.bounds.s_grid);
    return {verdict_row(ctx, v)};
}

template <int Dim>
std::vector<Row> cmd_power_harnack(const Context& ctx) {
    const auto s = make_setup<Dim>(ctx);
    const auto& c = ctx.cfg;
    const auto f = make_test_function<Dim>(c.functions.f, c.functions.C);
    const auto v = check_power_harnack<Dim>(s.coeffs, s.xi, s.eta, f, *c.coupling.p, s.grid, c.mc.n, c.mc.seed,
                                            ctx.exec, ctx.tol(), c.bounds.eps_grid, c.bounds.s_grid);
    if (!v.note.empty() && c.output.verbosity > 0) *ctx.out << "note: " << v.note << "\n";
    return {verdict_row(ctx, v)};
}

template <int Dim>
std::vector<Row> cmd_stationary(const Context& ctx) {
    const auto& c = ctx.cfg;
    auto coeffs = builtin_system<Dim>(c.system.name, c.system.params, c.problem.d);
    const GridSpec grid(c.problem.r0, c.problem.T, c.problem.m);
    const auto x0 = initial_segment<Dim>(ctx, c.initial.xi, c.initial.xi_file).newest();
    const auto st = sample_stationary_segments<Dim>(coeffs, grid, c.mc.n, {c.stationary.burn_in, c.stationary.spacing},
                                                    c.mc.seed, x0);
    std::vector<Row> rows;
    rows.push_back(info_row(ctx, "stationary_mean", st.endpoint_mean));
    auto compare = [&](std::string claim, double value, const Opt& ref, double tol) {
        Row r = base_row(ctx, std::move(claim));
        r.lhs = value;
        if (ref) {
            r.rhs = *ref;
            r.bound = tol;
            r.verdict = std::abs(value - *ref) <= tol * std::abs(*ref) ? "holds" : "violated";
        }
        rows.push_back(r);
    };
    compare("stationary_variance", st.endpoint_variance, c.stationary.ref_variance, c.stationary.var_tol);
    compare("stationary_autocov", st.lag_autocovariance, c.stationary.ref_autocov, c.stationary.autocov_tol);
    return rows;
}

template <int Dim>
std::vector<Row> dispatch(const Context& ctx) {
    const auto& cmd = ctx.command;
    if (cmd == "audit") return cmd_audit<Dim>(ctx);
    if (cmd == "simulate") return cmd_simulate<Dim>(ctx);
    if (cmd == "couple") return cmd_couple<Dim>(ctx);
    if (cmd == "bounds") return cmd_bounds<Dim>(ctx);
    if (cmd == "entropy") return cmd_entropy<Dim>(ctx);
    if (cmd == "log-harnack") return cmd_log_harnack<Dim>(ctx);
    if (cmd == "power-harnack") return cmd_power_harnack<Dim>(ctx);
    if (cmd == "stationary") return cmd_stationary<Dim>(ctx);
    throw InvalidArgument("unknown command '" + cmd + "'");
}

} // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Coupling and Harnack-inequality experiments for delay SDEs", "harnack_lab"};
    app.set_version_flag("--version", std::string(version()));
    app.require_subcommand(1);

    struct Flags {
        std::string config;
        std::optional<std::uint64_t> seed;
        std::optional<long> paths;
        std::optional<std::string> out;
        std::optional<int> threads;
    } flags;

    const std::vector<std::pair<std::string, std::string>> subcommands{
        {"audit", "sample the coefficients and test the declared constants"},
        {"simulate", "estimate P_T f from xi"},
        {"couple", "run the coupling; merge statistics and the Girsanov weight"},
        {"bounds", "evaluate the closed-form bounds"},
        {"entropy", "entropy of the Girsanov weight and exponential moments of the gap"},
        {"log-harnack", "check the log-Harnack inequality"},
        {"power-harnack", "check the power-Harnack inequality"},
        {"stationary", "sample stationary segments of a delay-free system"},
    };
    for (const auto& [name, help] : subcommands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", flags.config, "experiment config file")->required();
        sub->add_option("--seed", flags.seed, "overrides mc.seed");
        sub->add_option("--paths", flags.paths, "overrides mc.n (audit.n for audit)");
        sub->add_option("--out", flags.out, "overrides output.dir");
        sub->add_option("--threads", flags.threads, "worker threads; results do not depend on it")
            ->check(CLI::PositiveNumber);
    }

    std::vector<std::string> argv_store{"harnack_lab"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_store) argv.push_back(a.data());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kHolds : kError;
    }

    try {
        Context ctx;
        ctx.command = app.get_subcommands().front()->get_name();
        ctx.out = &out;
        std::ifstream in(flags.config, std::ios::binary);
        if (!in) throw InvalidArgument("cannot open config file " + flags.config);
        std::stringstream text;
        text << in.rdbuf();
        ctx.config_dir = fs::path(flags.config).parent_path();
        ctx.cfg = parse_config(text.str(), ctx.command);
        if (flags.seed) ctx.cfg.mc.seed = *flags.seed;
        if (flags.paths) {
            if (ctx.command == "audit")
                ctx.cfg.audit.n = *flags.paths;
            else
                ctx.cfg.mc.n = *flags.paths;
        }
        if (flags.out) ctx.cfg.output.dir = *flags.out;
        const auto problems = validate_config(ctx.cfg, ctx.command);
        if (!problems.empty()) throw ConfigError(problems);
        ctx.exec.threads = flags.threads.value_or(0);
        ctx.exec.resolve();

        const auto rows = ctx.cfg.problem.d == 1 ? dispatch<1>(ctx) : dispatch<Eigen::Dynamic>(ctx);

        fs::create_directories(ctx.cfg.output.dir);
        const auto csv_path = fs::path(ctx.cfg.output.dir) / (ctx.command + ".csv");
        std::ofstream csv(csv_path, std::ios::binary);
        if (!csv) throw Error("cannot write " + csv_path.string());
        write_csv(csv, rows);
        if (ctx.cfg.output.verbosity > 0) {
            print_rows(out, rows);
            out << "wrote " << csv_path.string() << "\n";
        }
        return exit_code(rows);
    } catch (const HorizonTooShort& e) {
        err << "error: " << e.what() << "\n";
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
    }
    return kError;
}

int run_command(const std::vector<std::string>& args) { return run_command(args, std::cout, std::cerr); }

} // namespace harnack::cli
