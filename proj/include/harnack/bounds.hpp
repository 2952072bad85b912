#pragma once

// Closed-form constants and bounds: H_T of the log-Harnack inequality, the
// finite-horizon entropy bound of the coupling, the power-Harnack exponent
// Phi_p with its auxiliary lambda_p, Theta_p, W_eps, s_eps, and the
// right-hand sides of three exponential-moment bounds for the coupling gap.
//
// Infima over s (and eps) are taken on a grid followed by golden-section
// refinement. Every evaluated point is an admissible parameter, so the
// reported value is always a valid upper approximation of the infimum.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "harnack/coefficients.hpp"
#include "harnack/errors.hpp"

namespace harnack {

struct GapPair {
    double point_gap = 0.0; // |xi(0) - eta(0)|
    double seg_gap = 0.0;   // ||xi - eta||_inf

    void validate() const {
        detail::require(std::isfinite(point_gap) && std::isfinite(seg_gap), "gaps must be finite");
        detail::require(point_gap >= 0.0 && seg_gap >= 0.0, "gaps must be nonnegative");
        detail::require(point_gap <= seg_gap * (1.0 + 1e-12), "point gap cannot exceed the segment gap");
    }
};

template <int Dim>
GapPair gaps_of(const SegmentPath<Dim>& xi, const SegmentPath<Dim>& eta) {
    return {(xi.newest() - eta.newest()).norm(), sup_distance(xi, eta)};
}

struct BoundTerm {
    std::string name;
    double value = 0.0;
};

struct BoundReport {
    std::string bound;
    double value = 0.0;
    double s_star = 0.0;
    std::optional<double> eps_star;
    std::vector<BoundTerm> terms; // already multiplied by any prefactor
    int s_grid = 0;
    int eps_grid = 0;
    bool open_infimum = false;    // minimizer sits on an open end of the range
    std::string note;
};

// K4 / (1 - e^{-K4 s}), positive for every K4.
inline double k4_ratio(double k4, double s) {
    detail::require(s > 0.0 && std::isfinite(s), "k4_ratio: s must be positive");
    const double x = k4 * s;
    if (std::abs(x) < 1e-6) return (1.0 + x / 2.0 + x * x / 12.0) / s;
    return k4 / -std::expm1(-x);
}

namespace detail {

struct Minimum {
    double x = 0.0;
    double f = std::numeric_limits<double>::infinity();
};

inline Minimum golden_section(const std::function<double(double)>& f, double a, double b, int iters = 200) {
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double fc = f(c), fd = f(d);
    for (int i = 0; i < iters && (b - a) > 1e-14 * std::max(1.0, std::abs(b)); ++i) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = f(d);
        }
    }
    return fc <= fd ? Minimum{c, fc} : Minimum{d, fd};
}

// Points lo = x_0 < ... < x_{n-1} = hi, geometric.
inline std::vector<double> log_grid(double lo, double hi, int n) {
    std::vector<double> g(static_cast<std::size_t>(n));
    if (n == 1) {
        g[0] = hi;
        return g;
    }
    const double r = std::log(hi / lo);
    for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = lo * std::exp(r * i / (n - 1));
    g.back() = hi;
    return g;
}

// Grid minimum of f on (0, hi] followed by golden-section refinement in the
// bracket around it. at_lower reports whether the grid minimizer was the
// smallest point, i.e. the infimum may sit at the open end.
inline Minimum minimize_log(const std::function<double(double)>& f, double hi, int n, bool* at_lower = nullptr) {
    require(n >= 3, "grid size must be at least 3");
    const auto grid = log_grid(hi * 1e-6, hi, n);
    std::size_t best = 0;
    double best_f = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double v = f(grid[i]);
        if (v < best_f) {
            best_f = v;
            best = i;
        }
    }
    Minimum result{grid[best], best_f};
    if (at_lower) *at_lower = best == 0;
    if (!std::isfinite(best_f)) return result;
    const double a = best == 0 ? grid[0] * 0.5 : grid[best - 1];
    const double b = best + 1 == grid.size() ? grid[best] : grid[best + 1];
    const auto refined = golden_section(f, a, b);
    if (refined.f < result.f) result = refined;
    return result;
}

inline double growth(const AssumptionConstants& k, double s) {
    return std::exp(k.k2 * k.k2 * (k.k1 * k.k1 * s + 8.0) * s);
}

} // namespace detail

// Integrand of H_T at a fixed s: the log-Harnack bound obtained with t0 = s.
inline std::pair<double, double> h_t_terms(const AssumptionConstants& k, const GapPair& g, double r0, double s) {
    const double first = 2.0 * k.k3 * k.k3 * k4_ratio(k.k4, s) * g.point_gap * g.point_gap;
    const double second = k.k1 * k.k1 * (r0 / 2.0 + s * (1.0 + k.k2 * k.k2 * k.k3 * k.k3)) * detail::growth(k, s) *
                          g.seg_gap * g.seg_gap;
    return {first, second};
}

inline double h_t_at(const AssumptionConstants& k, const GapPair& g, double r0, double s) {
    const auto [a, b] = h_t_terms(k, g, r0, s);
    return a + b;
}

inline BoundReport bound_H_T(const AssumptionConstants& k, const GapPair& g, double T, double r0,
                             int s_grid_size = 200) {
    k.validate();
    g.validate();
    detail::require(r0 > 0.0, "r0 must be positive");
    if (!(T > r0)) throw HorizonTooShort("the log-Harnack bound needs T > r0");
    BoundReport rep;
    rep.bound = "H_T";
    rep.s_grid = s_grid_size;
    const double S = T - r0;
    bool at_lower = false;
    const auto best = detail::minimize_log([&](double s) { return h_t_at(k, g, r0, s); }, S, s_grid_size, &at_lower);
    rep.s_star = best.x;
    const auto [a, b] = h_t_terms(k, g, r0, best.x);
    rep.value = a + b;
    rep.terms = {{"point", a}, {"segment", b}};
    rep.open_infimum = at_lower && rep.value > 0.0;
    return rep;
}

// Entropy bound for R_t, t in (0, t0], with gamma built from theta.
inline double bound_entropy_coupling(const AssumptionConstants& k, double theta, double t, double t0,
                                   const GapPair& g) {
    k.validate();
    g.validate();
    detail::require(theta > 0.0 && theta < 2.0, "theta must lie in (0, 2)");
    detail::require(t0 > 0.0 && t > 0.0 && t <= t0 * (1.0 + 1e-12), "need 0 < t <= t0");
    const double first = 2.0 * k.k3 * k.k3 * k4_ratio(k.k4, t0) * g.point_gap * g.point_gap / (theta * (2.0 - theta));
    const double second = t * k.k1 * k.k1 * (1.0 + k.k2 * k.k2 * k.k3 * k.k3) * detail::growth(k, t) /
                          (theta * theta) * g.seg_gap * g.seg_gap;
    return first + second;
}

// Entropy bound at the horizon T: the t0 bound plus the contribution of
// [t0, T], where the points agree but the segments still differ.
inline double bound_entropy_horizon(const AssumptionConstants& k, double t0, double r0, const GapPair& g,
                                    double theta = 1.0) {
    return bound_entropy_coupling(k, theta, t0, t0, g) +
           k.k1 * k.k1 * r0 / 2.0 * detail::growth(k, t0) * g.seg_gap * g.seg_gap;
}

inline double lambda_p(double p) {
    detail::require(std::isfinite(p) && p > 1.0, "lambda_p needs p > 1");
    const double r = std::sqrt(p) - 1.0;
    return 1.0 / (2.0 * r * r);
}

inline double power_threshold(const AssumptionConstants& k) {
    const double r = 1.0 + k.k2 * k.k3;
    return r * r;
}

inline void require_power_range(double p, const AssumptionConstants& k) {
    const double thr = power_threshold(k);
    if (!(p > thr))
        throw InvalidArgument("power Harnack needs p > (1 + K2 K3)^2 = " + format_double(thr) + ", got p = " +
                              format_double(p));
}

inline bool theta_set_contains(double eps, double p, const AssumptionConstants& k) {
    detail::require(eps > 0.0 && eps < 1.0, "eps must lie in (0, 1)");
    require_power_range(p, k);
    if (k.k2 == 0.0) return true;
    const double lhs = std::pow(1.0 - eps, 4) / (2.0 * std::pow(1.0 + eps, 3) * k.k2 * k.k2 * k.k3 * k.k3);
    return lhs >= lambda_p(p);
}

// Theta_p = (0, eps_max]; the defining left side decreases in eps.
inline double theta_set_sup(double p, const AssumptionConstants& k) {
    require_power_range(p, k);
    if (k.k2 == 0.0) return 1.0;
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid > 0.0 && theta_set_contains(mid, p, k))
            lo = mid;
        else
            hi = mid;
    }
    return lo;
}

inline double w_eps(double eps, double lam, const AssumptionConstants& k, double r0) {
    detail::require(eps > 0.0 && eps < 1.0, "eps must lie in (0, 1)");
    detail::require(lam > 0.0, "lambda must be positive");
    const double e2 = eps * eps;
    const double a = 8.0 * (1.0 + eps) * r0 * std::pow(k.k1, 3) * k.k2 * lam *
                     (4.0 * (1.0 + eps) * r0 * k.k1 * k.k2 * lam + eps) / e2;
    const double b = 2.0 * (1.0 + eps) * (1.0 + eps) * lam / e2;
    const double c = std::pow(1.0 + eps, 3) * k.k1 * k.k1 * k.k2 * k.k2 * k.k3 * k.k3 * lam /
                     (8.0 * e2 * std::pow(1.0 - eps, 3));
    return std::max({a, b, c});
}

inline double s_eps(double eps, double lam, const AssumptionConstants& k, double r0) {
    if (k.k2 == 0.0) return std::numeric_limits<double>::infinity();
    const double w = w_eps(eps, lam, k, r0);
    return (std::sqrt(k.k1 * k.k1 + 2.0 * w) - k.k1) / (4.0 * w * k.k2);
}

struct PhiTerms {
    double entropy = 0.0;  // eps / (2(1+eps))
    double diffusion = 0.0;
    double point = 0.0;
    double segment = 0.0;
    double sum() const { return entropy + diffusion + point + segment; }
};

// Bracketed expression of Phi_p at (eps, s), before the (sqrt p - 1)/sqrt p
// prefactor.
inline PhiTerms phi_p_terms(double p, const AssumptionConstants& k, const GapPair& g, double r0, double eps,
                            double s) {
    const double lam = lambda_p(p);
    const double w = w_eps(eps, lam, k, r0);
    PhiTerms t;
    t.entropy = eps / (2.0 * (1.0 + eps));
    if (k.k2 != 0.0) {
        const double denom = 1.0 - 4.0 * k.k1 * k.k2 * s;
        t.diffusion = denom > 0.0 ? 16.0 * k.k2 * k.k2 * s * s * w / denom : std::numeric_limits<double>::infinity();
    }
    t.point = lam * (1.0 + eps) * (1.0 + eps) * k.k3 * k.k3 * k4_ratio(k.k4, s) * g.point_gap * g.point_gap /
              (2.0 * eps * (1.0 - eps) * (1.0 - eps) * (1.0 + 2.0 * eps));
    t.segment = (k.k1 * k.k1 * r0 * lam + 2.0 * s * w) * g.seg_gap * g.seg_gap;
    return t;
}

inline double phi_p_prefactor(double p) { return (std::sqrt(p) - 1.0) / std::sqrt(p); }

// Largest admissible s for a given eps.
inline double phi_p_s_max(double p, const AssumptionConstants& k, double r0, double T, double eps) {
    return std::min(s_eps(eps, lambda_p(p), k, r0), T - r0);
}

inline BoundReport bound_Phi_p(double p, double T, const AssumptionConstants& k, const GapPair& g, double r0,
                               int eps_grid = 200, int s_grid = 200) {
    k.validate();
    g.validate();
    require_power_range(p, k);
    if (!(T > r0)) throw HorizonTooShort("the power-Harnack bound needs T > r0");
    detail::require(eps_grid >= 3 && s_grid >= 3, "grid sizes must be at least 3");

    const double pref = phi_p_prefactor(p);
    const double eps_max = std::min(theta_set_sup(p, k), 1.0 - 1e-9);
    if (!(eps_max > 0.0)) throw Error("Theta_p is empty on the eps grid");

    auto inner = [&](double eps, bool* s_at_lower) {
        const double hi = phi_p_s_max(p, k, r0, T, eps);
        return detail::minimize_log([&](double s) { return phi_p_terms(p, k, g, r0, eps, s).sum(); }, hi, s_grid,
                                    s_at_lower);
    };

    // eps grid: logistic spacing in eps / eps_max, dense at both ends.
    std::vector<double> eps_pts;
    for (int i = 0; i < eps_grid - 1; ++i) {
        const double z = -14.0 + 28.0 * i / (eps_grid - 2);
        eps_pts.push_back(eps_max / (1.0 + std::exp(-z)));
    }
    eps_pts.push_back(eps_max);

    std::size_t best = 0;
    detail::Minimum best_s;
    for (std::size_t i = 0; i < eps_pts.size(); ++i) {
        const auto m = inner(eps_pts[i], nullptr);
        if (m.f < best_s.f) {
            best_s = m;
            best = i;
        }
    }
    if (!std::isfinite(best_s.f)) throw Error("Phi_p objective is not finite on the grid");
    double eps_star = eps_pts[best];
    double s_star = best_s.x;
    double value = best_s.f;

    const double ea = best == 0 ? eps_pts[0] * 0.5 : eps_pts[best - 1];
    const double eb = best + 1 == eps_pts.size() ? eps_pts[best] : eps_pts[best + 1];
    const auto refined = detail::golden_section([&](double e) { return inner(e, nullptr).f; }, ea, eb, 80);
    if (refined.f < value) {
        eps_star = refined.x;
        const auto m = inner(eps_star, nullptr);
        s_star = m.x;
        value = m.f;
    }
    bool s_at_lower = false;
    inner(eps_star, &s_at_lower);

    BoundReport rep;
    rep.bound = "Phi_p";
    rep.value = pref * value;
    rep.s_star = s_star;
    rep.eps_star = eps_star;
    rep.s_grid = s_grid;
    rep.eps_grid = eps_grid;
    const auto t = phi_p_terms(p, k, g, r0, eps_star, s_star);
    rep.terms = {{"entropy", pref * t.entropy},
                 {"diffusion", pref * t.diffusion},
                 {"point", pref * t.point},
                 {"segment", pref * t.segment}};
    rep.open_infimum = best == 0 || s_at_lower;
    if (rep.open_infimum) rep.note = "grid minimum on an open end of the range; the infimum is not attained";
    return rep;
}

// ---------------------------------------------------------------------------
// Exponential moments of the coupling gap. Each right-hand side has the shape
//   prefactor * (E_Q exp[inner_multiplier * int_0^s ||X_t - Y_t||^2 dt])^inner_power,
// with inner_multiplier = 0 when the bound is fully explicit.

// weighted_point_gap:     E_Q exp[lambda int_0^s |X-Y|^2 / gamma^2], theta = 2(1 - eps)
// terminal_segment_gap:   E_Q exp[lambda ||X_s - Y_s||^2]
// integrated_segment_gap: E_Q exp[lambda int_0^s ||X_t - Y_t||^2 dt], fully explicit
enum class Lemma { weighted_point_gap, terminal_segment_gap, integrated_segment_gap };

struct LemmaParams {
    AssumptionConstants constants;
    double lambda = 0.0;
    double eps = 0.5; // weighted_point_gap
    double s = 0.0;   // integrated_segment_gap
    double t0 = 1.0;  // weighted_point_gap: gamma(0) with theta = 2(1 - eps)
    GapPair gaps;
};

struct LemmaRhs {
    double prefactor = 1.0;
    double inner_multiplier = 0.0;
    double inner_power = 1.0;
};

inline double integrated_gap_lambda_cap(const AssumptionConstants& k, double s) {
    detail::require(s > 0.0, "s must be positive");
    if (k.k2 == 0.0) return std::numeric_limits<double>::infinity();
    return (1.0 - 4.0 * k.k1 * k.k2 * s) / (8.0 * k.k2 * k.k2 * s * s);
}

inline double weighted_gap_lambda_cap(const AssumptionConstants& k, double eps) {
    if (k.k2 == 0.0) return std::numeric_limits<double>::infinity();
    return std::pow(1.0 - eps, 4) / (2.0 * k.k2 * k.k2 * (1.0 + eps));
}

inline LemmaRhs lemma_rhs(Lemma id, const LemmaParams& prm) {
    const auto& k = prm.constants;
    k.validate();
    prm.gaps.validate();
    const double lam = prm.lambda;
    detail::require(std::isfinite(lam) && lam >= 0.0, "lambda must be nonnegative");
    const double sg2 = prm.gaps.seg_gap * prm.gaps.seg_gap;
    switch (id) {
    case Lemma::weighted_point_gap: {
        const double eps = prm.eps;
        detail::require(eps > 0.0 && eps < 1.0, "eps must lie in (0, 1)");
        detail::require(lam > 0.0, "weighted_point_gap needs lambda > 0");
        detail::require(lam <= weighted_gap_lambda_cap(k, eps), "lambda exceeds (1-eps)^4 / (2 K2^2 (1+eps))");
        detail::require(prm.t0 > 0.0, "t0 must be positive");
        const double gamma0 = 2.0 * eps / k4_ratio(k.k4, prm.t0);
        const double pg2 = prm.gaps.point_gap * prm.gaps.point_gap;
        LemmaRhs r;
        r.prefactor = std::exp(lam * (1.0 + eps) * pg2 / ((1.0 + 2.0 * eps) * (1.0 - eps) * (1.0 - eps) * gamma0));
        r.inner_multiplier = k.k1 * k.k1 * k.k2 * k.k2 * (1.0 + eps) * lam / (8.0 * eps * eps * std::pow(1.0 - eps, 3));
        r.inner_power = eps / (1.0 + 2.0 * eps);
        return r;
    }
    case Lemma::terminal_segment_gap: {
        LemmaRhs r;
        r.prefactor = std::exp(1.0 + lam * sg2);
        r.inner_multiplier = 4.0 * lam * k.k2 * (2.0 * lam * k.k2 + k.k1);
        r.inner_power = 0.5;
        return r;
    }
    case Lemma::integrated_segment_gap: {
        const double s = prm.s;
        detail::require(s > 0.0, "integrated_segment_gap needs s > 0");
        const double denom = 1.0 - 4.0 * k.k1 * k.k2 * s;
        detail::require(denom > 0.0, "integrated_segment_gap needs 1 - 4 K1 K2 s > 0");
        detail::require(lam <= integrated_gap_lambda_cap(k, s) * (1.0 + 1e-12),
                        "lambda exceeds (1 - 4 K1 K2 s) / (8 K2^2 s^2)");
        LemmaRhs r;
        r.prefactor = std::exp(16.0 * k.k2 * k.k2 * s * s * lam / denom + 2.0 * s * lam * sg2);
        return r;
    }
    }
    throw InvalidArgument("unknown lemma");
}

inline std::string to_string(Lemma id) {
    switch (id) {
    case Lemma::weighted_point_gap: return "weighted_point_gap";
    case Lemma::terminal_segment_gap: return "terminal_segment_gap";
    case Lemma::integrated_segment_gap: return "integrated_segment_gap";
    }
    return "?";
}

inline Lemma parse_lemma(const std::string& id) {
    if (id == "weighted_point_gap") return Lemma::weighted_point_gap;
    if (id == "terminal_segment_gap") return Lemma::terminal_segment_gap;
    if (id == "integrated_segment_gap") return Lemma::integrated_segment_gap;
    throw InvalidArgument("unknown lemma '" + id +
                          "' (expected weighted_point_gap, terminal_segment_gap or integrated_segment_gap)");
}

} // namespace harnack
