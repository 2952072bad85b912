#pragma once

// Monte Carlo estimators for the semigroup, the entropy of the Girsanov
// weight and exponential functionals of the coupling, plus one-sided
// statistical verdicts for the inequalities and a stationary sampler for the
// delay-free equation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "harnack/bounds.hpp"
#include "harnack/coefficients.hpp"
#include "harnack/coupling.hpp"
#include "harnack/errors.hpp"
#include "harnack/integrator.hpp"
#include "harnack/parallel.hpp"
#include "harnack/random.hpp"
#include "harnack/segment.hpp"

namespace harnack {

struct MCEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    long n = 0;
    std::uint64_t seed = 0;
    double min = 0.0;
    double max = 0.0;
    long failures = 0; // unmerged coupling paths, included in the mean
    std::optional<double> max_exponent;

    static MCEstimate from_samples(std::span<const double> v, std::uint64_t seed, long failures = 0) {
        detail::require(v.size() >= 2, "an estimate needs at least two samples");
        MCEstimate e;
        e.n = static_cast<long>(v.size());
        e.seed = seed;
        e.failures = failures;
        e.mean = pairwise_sum(v) / static_cast<double>(v.size());
        std::vector<double> sq(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - e.mean) * (v[i] - e.mean);
        const double var = pairwise_sum(sq) / static_cast<double>(v.size() - 1);
        e.std_error = std::sqrt(var / static_cast<double>(v.size()));
        const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        e.min = *lo;
        e.max = *hi;
        return e;
    }

    static MCEstimate exact(double value) {
        MCEstimate e;
        e.mean = e.min = e.max = value;
        return e;
    }
};

enum class Verdict { holds, violated, inconclusive };

inline std::string to_string(Verdict v) {
    switch (v) {
    case Verdict::holds: return "holds";
    case Verdict::violated: return "violated";
    case Verdict::inconclusive: return "inconclusive";
    }
    return "?";
}

struct Tolerances {
    double k_tol = 3.0;
    double k_viol = 6.0;
    double max_unmerged_fraction = 1e-3;
};

struct VerdictReport {
    std::string claim;
    MCEstimate lhs;
    MCEstimate rhs;
    double bound = 0.0; // closed-form part of the right-hand side
    double margin_se = 0.0;
    Verdict verdict = Verdict::inconclusive;
    double unmerged_fraction = 0.0;
    std::string note;
};

namespace detail {

inline double margin_in_se(double lhs, double lhs_se, double rhs, double rhs_se) {
    const double se = std::hypot(lhs_se, rhs_se);
    const double diff = rhs - lhs;
    if (se > 0.0) return diff / se;
    if (diff == 0.0) return 0.0;
    return diff > 0.0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
}

inline Verdict classify(double margin, const Tolerances& tol) {
    if (margin >= -tol.k_tol) return Verdict::holds;
    if (margin <= -tol.k_viol) return Verdict::violated;
    return Verdict::inconclusive;
}

} // namespace detail

// lhs <= rhs tested one-sided in units of the combined standard error.
inline VerdictReport make_verdict(std::string claim, const MCEstimate& lhs, const MCEstimate& rhs, double bound,
                                  const Tolerances& tol, double unmerged_fraction = 0.0) {
    VerdictReport r;
    r.claim = std::move(claim);
    r.lhs = lhs;
    r.rhs = rhs;
    r.bound = bound;
    r.unmerged_fraction = unmerged_fraction;
    r.margin_se = detail::margin_in_se(lhs.mean, lhs.std_error, rhs.mean, rhs.std_error);
    r.verdict = detail::classify(r.margin_se, tol);
    if (unmerged_fraction > tol.max_unmerged_fraction) {
        r.verdict = Verdict::inconclusive;
        r.note = "unmerged fraction " + format_double(unmerged_fraction) + " above " +
                 format_double(tol.max_unmerged_fraction);
    }
    return r;
}

// ---------------------------------------------------------------------------
// Test functions

template <int Dim>
struct TestFunction {
    std::string id;
    double cap = 100.0;
    double lower = 1.0; // declared range, asserted on every evaluation
    double upper = 101.0;
    std::function<double(const SegmentPath<Dim>&)> eval;

    double operator()(const SegmentPath<Dim>& seg) const {
        const double v = eval(seg);
        if (!std::isfinite(v)) throw Error("test function '" + id + "' is not finite");
        if (v < lower || v > upper)
            throw Error("test function '" + id + "' left its declared range [" + format_double(lower) + ", " +
                        format_double(upper) + "]: " + format_double(v));
        return v;
    }
};

// quad_cap:         1 + min(|xi(0)|^2, C)
// exp_sup:          exp(min(||xi||_inf, C))
// capped_square:    min(|xi(0)|^2, C)
// constant:         C
// point_coordinate: xi(0)_1, unbounded, for moment checks only
template <int Dim>
TestFunction<Dim> make_test_function(const std::string& id, double cap = 100.0) {
    detail::require(std::isfinite(cap) && cap >= 0.0, "test function cap must be finite and nonnegative");
    TestFunction<Dim> f;
    f.id = id;
    f.cap = cap;
    if (id == "quad_cap") {
        f.lower = 1.0;
        f.upper = 1.0 + cap;
        f.eval = [cap](const SegmentPath<Dim>& s) { return 1.0 + std::min(s.newest().squaredNorm(), cap); };
    } else if (id == "exp_sup") {
        f.lower = 1.0;
        f.upper = std::exp(cap);
        f.eval = [cap](const SegmentPath<Dim>& s) {
            double sup = 0.0;
            for (int i = 0; i <= s.m(); ++i) sup = std::max(sup, s[i].norm());
            return std::exp(std::min(sup, cap));
        };
    } else if (id == "capped_square") {
        f.lower = 0.0;
        f.upper = cap;
        f.eval = [cap](const SegmentPath<Dim>& s) { return std::min(s.newest().squaredNorm(), cap); };
    } else if (id == "constant") {
        f.lower = f.upper = cap;
        f.eval = [cap](const SegmentPath<Dim>&) { return cap; };
    } else if (id == "point_coordinate") {
        f.lower = -std::numeric_limits<double>::infinity();
        f.upper = std::numeric_limits<double>::infinity();
        f.eval = [](const SegmentPath<Dim>& s) { return s.newest()(0); };
    } else {
        throw InvalidArgument("unknown test function '" + id +
                              "' (expected quad_cap, exp_sup, capped_square, constant or point_coordinate)");
    }
    return f;
}

// ---------------------------------------------------------------------------
// Semigroup

// g(X_T) for n independent paths from xi; path i uses noise (seed, i).
template <int Dim, class G>
std::vector<double> sample_terminal(const CoefficientSet<Dim>& coeffs, const SegmentPath<Dim>& xi,
                                    const GridSpec& grid, long n, std::uint64_t seed, const Execution& exec, G&& g) {
    detail::require(n >= 1, "path count must be positive");
    std::vector<double> out(static_cast<std::size_t>(n));
    parallel_for(n, exec, [&](long i) {
        const auto seg = run_path<Dim>(coeffs, xi, grid, seed, static_cast<std::uint64_t>(i),
                                       [](long, const Vector<Dim>&, const Vector<Dim>&) {});
        out[static_cast<std::size_t>(i)] = g(seg);
    });
    return out;
}

template <int Dim>
MCEstimate estimate_PT_f(const CoefficientSet<Dim>& coeffs, const SegmentPath<Dim>& xi, const TestFunction<Dim>& f,
                         const GridSpec& grid, long n, std::uint64_t seed, const Execution& exec = {}) {
    detail::require(n >= 2, "estimate_PT_f needs n >= 2");
    const auto v = sample_terminal<Dim>(coeffs, xi, grid, n, seed, exec, [&](const SegmentPath<Dim>& s) { return f(s); });
    return MCEstimate::from_samples(v, seed);
}

// ---------------------------------------------------------------------------
// Coupled functionals

struct CoupledSamples {
    std::vector<double> values;
    long unmerged = 0;
    double unmerged_fraction() const {
        return values.empty() ? 0.0 : static_cast<double>(unmerged) / static_cast<double>(values.size());
    }
};

template <int Dim, class Fn>
CoupledSamples map_coupled(const CoefficientSet<Dim>& coeffs, const SegmentPath<Dim>& xi,
                           const SegmentPath<Dim>& eta, const CouplingPlan& plan, const CouplingOptions& opts, long n,
                           std::uint64_t seed, const Execution& exec, Fn&& fn) {
    detail::require(n >= 1, "path count must be positive");
    CoupledSamples out;
    out.values.resize(static_cast<std::size_t>(n));
    std::vector<char> merged(static_cast<std::size_t>(n), 0);
    parallel_for(n, exec, [&](long i) {
        const auto traj = simulate_coupled<Dim>(coeffs, xi, eta, plan, seed, static_cast<std::uint64_t>(i), opts);
        out.values[static_cast<std::size_t>(i)] = fn(traj);
        merged[static_cast<std::size_t>(i)] = traj.merged ? 1 : 0;
    });
    out.unmerged = static_cast<long>(std::count(merged.begin(), merged.end(), 0));
    return out;
}

namespace detail {

inline long step_of(const GridSpec& grid, std::optional<double> t) {
    if (!t) return grid.steps();
    const auto k = grid.index_of(*t);
    require(k.has_value() && *k >= 0 && *k <= grid.steps(), "evaluation time must lie on the grid within [0, T]");
    return *k;
}

} // namespace detail

// 1/2 E_Q int_0^t |phi|^2, which equals E[R_t log R_t]. t defaults to T.
template <int Dim>
MCEstimate estimate_entropy_Q(const CoefficientSet<Dim>& coeffs, const SegmentPath<Dim>& xi,
                              const SegmentPath<Dim>& eta, const GammaSchedule& sched, const GridSpec& grid, long n,
                              std::uint64_t seed, const Execution& exec = {}, std::optional<double> t = {},
                              double delta_merge = 1e-8) {
    const CouplingPlan plan(sched, grid);
    const long k = detail::step_of(grid, t);
    CouplingOptions opts;
    opts.measure = Measure::Q;
    opts.delta_merge = delta_merge;
    const auto s = map_coupled<Dim>(coeffs, xi, eta, plan, opts, n, seed, exec, [k](const CoupledTrajectory<Dim>& tr) {
        return 0.5 * tr.phi_sq_cum[static_cast<std::size_t>(k)];
    });
    return MCEstimate::from_samples(s.values, seed, s.unmerged);
}

enum class Functional {
    phi_sq,             // int_0^t |phi|^2
    seg_gap_sq_int,     // int_0^t ||X_r - Y_r||_inf^2 dr
    gap_over_gamma_sq,  // int_0^{t ^ t0} |X - Y|^2 / gamma^2
    seg_gap_sq_at,      // ||X_t - Y_t||_inf^2
};

inline std::string to_string(Functional f) {
    switch (f) {
    case Functional::phi_sq: return "phi_sq";
    case Functional::seg_gap_sq_int: return "seg_gap_sq_int";
    case Functional::gap_over_gamma_sq: return "gap_over_gamma_sq";
    case Functional::seg_gap_sq_at: return "seg_gap_sq_at";
    }
    return "?";
}

inline Functional parse_functional(const std::string& s) {
    if (s == "phi_sq") return Functional::phi_sq;
    if (s == "seg_gap_sq_int") return Functional::seg_gap_sq_int;
    if (s == "gap_over_gamma_sq") return Functional::gap_over_gamma_sq;
    if (s == "seg_gap_sq_at") return Functional::seg_gap_sq_at;
    throw InvalidArgument("unknown functional '" + s +
                          "' (expected phi_sq, seg_gap_sq_int, gap_over_gamma_sq or seg_gap_sq_at)");
}

template <int Dim>
double read_functional(const CoupledTrajectory<Dim>& tr, Functional f, long k) {
    const auto i = static_cast<std::size_t>(k);
    switch (f) {
    case Functional::phi_sq: return tr.phi_sq_cum[i];
    case Functional::seg_gap_sq_int: return tr.seg_gap_sq_cum[i];
    case Functional::gap_over_gamma_sq: return tr.gap_over_gamma_cum[i];
    case Functional::seg_gap_sq_at: return tr.seg_gap_sq[i];
    }
    return 0.0;
}

// E_Q exp(lam * F) for a path functional F evaluated at time t (default T).
template <int Dim>
MCEstimate estimate_exp_functional(const CoefficientSet<Dim>& coeffs, const SegmentPath<Dim>& xi,
                                   const SegmentPath<Dim>& eta, const GammaSchedule& sched, const GridSpec& grid,
                                   double lam, long n, std::uint64_t seed, const Execution& exec = {},
                                   Functional functional = Functional::phi_sq, std::optional<double> t = {},
                                   double delta_merge = 1e-8) {
    detail::require(std::isfinite(lam) && lam >= 0.0, "lambda must be nonnegative");
    const CouplingPlan plan(sched, grid);
    const long k = detail::step_of(grid, t);
    CouplingOptions opts;
    opts.measure = Measure::Q;
    opts.delta_merge = delta_merge;
    opts.track_gaps = functional != Functional::phi_sq;
    const auto s = map_coupled<Dim>(coeffs, xi, eta, plan, opts, n, seed, exec, [&](const CoupledTrajectory<Dim>& tr) {
        return lam * read_functional(tr, functional, k);
    });
    const auto worst = std::max_element(s.values.begin(), s.values.end());
    if (*worst > 709.0)
        throw Error("exponent overflow: lambda = " + format_double(lam) + " gives exponent " + format_double(*worst) +
                    " on path " + std::to_string(worst - s.values.begin()));
    std::vector<double> ex(s.values.size());
    std::transform(s.values.begin(), s.values.end(), ex.begin(), [](double e) { return std::exp(e); });
    auto est = MCEstimate::from_samples(ex, seed, s.unmerged);
    est.max_exponent = *worst;
    return est;
}

// R_T = exp(log R_T) under P; its mean is 1 for a martingale weight.
template <int Dim>
MCEstimate estimate_girsanov_weight(const CoefficientSet<Dim>& coeffs, const SegmentPath<Dim>& xi,
                                    const SegmentPath<Dim>& eta, const GammaSchedule& sched, const GridSpec& grid,
                                    long n, std::uint64_t seed, const Execution& exec = {},
                                    double delta_merge = 1e-8) {
    const CouplingPlan plan(sched, grid);
    CouplingOptions opts;
    opts.measure = Measure::P;
    opts.delta_merge = delta_merge;
    const auto s = map_coupled<Dim>(coeffs, xi, eta, plan, opts, n, seed, exec,
                                    [](const CoupledTrajectory<Dim>& tr) { return std::exp(tr.final_log_weight()); });
    return MCEstimate::from_samples(s.values, seed, s.unmerged);
}

// Two-sided: |mean - 1| in standard errors against k_eq.
inline VerdictReport martingale_verdict(const MCEstimate& weight, double k_eq, const Tolerances& tol) {
    VerdictReport r;
    r.claim = "martingale";
    r.lhs = weight;
    r.rhs = MCEstimate::exact(1.0);
    r.bound = 1.0;
    r.unmerged_fraction = weight.n > 0 ? static_cast<double>(weight.failures) / static_cast<double>(weight.n) : 0.0;
    r.margin_se = -std::abs(detail::margin_in_se(weight.mean, weight.std_error, 1.0, 0.0));
    Tolerances two_sided = tol;
    two_sided.k_tol = k_eq;
    r.verdict = detail::classify(r.margin_se, two_sided);
    if (r.unmerged_fraction > tol.max_unmerged_fraction) r.verdict = Verdict::inconclusive;
    return r;
}

// ---------------------------------------------------------------------------
// Harnack inequalities

namespace detail {

inline std::uint64_t lhs_seed(std::uint64_t seed) { return derive_seed(seed, 0x4C4853); }
inline std::uint64_t rhs_seed(std::uint64_t seed) { return derive_seed(seed, 0x524853); }

} // namespace detail

// P_T log f(eta) <= log P_T f(xi) + H_T(xi, eta). With s_choice the bound
// uses that s instead of the infimum.
template <int Dim>
VerdictReport check_log_harnack(const CoefficientSet<Dim>& coeffs, const SegmentPath<Dim>& xi,
                                const SegmentPath<Dim>& eta, const TestFunction<Dim>& f, const GridSpec& grid, long n,
                                std::uint64_t seed, const Execution& exec = {}, const Tolerances& tol = {},
                                std::optional<double> s_choice = {}, int s_grid = 200) {
    const double T = grid.horizon();
    const double r0 = grid.r0();
    if (!(T > r0)) throw HorizonTooShort("the log-Harnack inequality only holds for T > r0 (T = " + format_double(T) +
                                         ", r0 = " + format_double(r0) + ")");
    detail::require(f.lower >= 1.0, "log-Harnack needs a test function with f >= 1");
    detail::require(n >= 2, "need at least two paths");
    const GapPair gaps = gaps_of(xi, eta);
    double bound = 0.0;
    if (s_choice) {
        detail::require(*s_choice > 0.0 && *s_choice <= T - r0, "s must lie in (0, T - r0]");
        bound = h_t_at(coeffs.constants, gaps, r0, *s_choice);
    } else {
        bound = bound_H_T(coeffs.constants, gaps, T, r0, s_grid).value;
    }

    const auto lv = sample_terminal<Dim>(coeffs, eta, grid, n, detail::lhs_seed(seed), exec,
                                         [&](const SegmentPath<Dim>& s) { return std::log(f(s)); });
    const auto rv = sample_terminal<Dim>(coeffs, xi, grid, n, detail::rhs_seed(seed), exec,
                                         [&](const SegmentPath<Dim>& s) { return f(s); });
    auto lhs = MCEstimate::from_samples(lv, seed);
    const auto pf = MCEstimate::from_samples(rv, seed);
    MCEstimate rhs = pf;
    rhs.mean = std::log(pf.mean) + bound;
    rhs.std_error = pf.std_error / pf.mean; // delta method
    rhs.min = std::log(pf.min) + bound;
    rhs.max = std::log(pf.max) + bound;
    return make_verdict("log-harnack", lhs, rhs, bound, tol);
}

// P_T f(eta) <= (P_T f^p(xi))^{1/p} exp(Phi_p).
template <int Dim>
VerdictReport check_power_harnack(const CoefficientSet<Dim>& coeffs, const SegmentPath<Dim>& xi,
                                  const SegmentPath<Dim>& eta, const TestFunction<Dim>& f, double p,
                                  const GridSpec& grid, long n, std::uint64_t seed, const Execution& exec = {},
                                  const Tolerances& tol = {}, int eps_grid = 200, int s_grid = 200) {
    require_power_range(p, coeffs.constants);
    const double T = grid.horizon();
    const double r0 = grid.r0();
    if (!(T > r0)) throw HorizonTooShort("the power-Harnack inequality needs T > r0");
    detail::require(f.lower >= 0.0 && std::isfinite(f.upper), "power-Harnack needs a bounded f >= 0");
    detail::require(n >= 2, "need at least two paths");
    const auto phi = bound_Phi_p(p, T, coeffs.constants, gaps_of(xi, eta), r0, eps_grid, s_grid);

    const auto lv = sample_terminal<Dim>(coeffs, eta, grid, n, detail::lhs_seed(seed), exec,
                                         [&](const SegmentPath<Dim>& s) { return f(s); });
    const auto rv = sample_terminal<Dim>(coeffs, xi, grid, n, detail::rhs_seed(seed), exec,
                                         [&](const SegmentPath<Dim>& s) { return std::pow(f(s), p); });
    const auto lhs = MCEstimate::from_samples(lv, seed);
    const auto pf = MCEstimate::from_samples(rv, seed);
    const double scale = std::exp(phi.value);
    MCEstimate rhs = pf;
    rhs.mean = std::pow(pf.mean, 1.0 / p) * scale;
    rhs.std_error = pf.mean > 0.0 ? std::pow(pf.mean, 1.0 / p - 1.0) / p * pf.std_error * scale : 0.0;
    rhs.min = std::pow(pf.min, 1.0 / p) * scale;
    rhs.max = std::pow(pf.max, 1.0 / p) * scale;
    auto r = make_verdict("power-harnack", lhs, rhs, phi.value, tol);
    if (phi.open_infimum) r.note = phi.note;
    return r;
}

// ---------------------------------------------------------------------------
// Stationary segments of the delay-free equation

struct StationaryOptions {
    double burn_in = 10.0;
    double spacing = 0.0; // time between segment ends; 0 means 2 r0
};

template <int Dim>
struct StationarySample {
    std::vector<SegmentPath<Dim>> segments;
    double endpoint_mean = 0.0;
    double endpoint_variance = 0.0;
    double lag_autocovariance = 0.0; // cov(X(0), X(-r0)) of the first coordinate
};

// One long run from x0, burn-in discarded, then n segments whose ends are
// `spacing` apart (at least r0, so segments never overlap).
template <int Dim>
StationarySample<Dim> sample_stationary_segments(const CoefficientSet<Dim>& coeffs, const GridSpec& grid, long n,
                                                 const StationaryOptions& opt, std::uint64_t seed,
                                                 const Vector<Dim>& x0) {
    detail::require(coeffs.delay_free, "the stationary sampler needs a delay-free system (b = 0)");
    detail::require(coeffs.autonomous, "the stationary sampler needs time-independent Z and sigma");
    detail::require(n >= 2, "need at least two segments");
    detail::require(opt.burn_in >= 0.0, "burn-in must be nonnegative");
    const double spacing = opt.spacing > 0.0 ? opt.spacing : 2.0 * grid.r0();
    detail::require(spacing >= grid.r0() * (1.0 - 1e-12), "segment spacing must be at least r0");
    const auto burn = static_cast<long>(std::llround(opt.burn_in / grid.h()));
    const auto gap = static_cast<long>(std::llround(spacing / grid.h()));
    const int m = grid.m();

    StationarySample<Dim> out;
    out.segments.reserve(static_cast<std::size_t>(n));
    const NoiseStream noise(seed);
    const double h = grid.h();
    const double sqrt_h = std::sqrt(h);
    auto seg = SegmentPath<Dim>::constant(grid.r0(), m, x0);
    Vector<Dim> dW(coeffs.dim);
    // First segment ends at burn + r0 so that all of it lies after the burn-in.
    long next_end = burn + m;
    for (long k = 0; static_cast<long>(out.segments.size()) < n; ++k) {
        if (k == next_end) {
            out.segments.push_back(seg);
            next_end += gap;
            if (static_cast<long>(out.segments.size()) == n) break;
        }
        noise.increment(0, static_cast<std::uint64_t>(k), sqrt_h, dW);
        const auto next = step_euler<Dim>(0.0, seg.newest(), seg, dW, h, coeffs);
        detail::check_finite<Dim>(next, k + 1);
        seg.roll(next);
    }

    std::vector<double> ends, starts;
    for (const auto& s : out.segments) {
        ends.push_back(s.newest()(0));
        starts.push_back(s.oldest()(0));
    }
    const double nn = static_cast<double>(n);
    out.endpoint_mean = pairwise_sum(ends) / nn;
    const double start_mean = pairwise_sum(starts) / nn;
    std::vector<double> sq(ends.size()), cross(ends.size());
    for (std::size_t i = 0; i < ends.size(); ++i) {
        sq[i] = (ends[i] - out.endpoint_mean) * (ends[i] - out.endpoint_mean);
        cross[i] = (ends[i] - out.endpoint_mean) * (starts[i] - start_mean);
    }
    out.endpoint_variance = pairwise_sum(sq) / (nn - 1.0);
    out.lag_autocovariance = pairwise_sum(cross) / (nn - 1.0);
    return out;
}

} // namespace harnack
