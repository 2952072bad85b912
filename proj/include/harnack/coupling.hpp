#pragma once

// Coupling by change of measure. Y is driven towards X by the extra drift
// (1/gamma) sigma(Y) sigma(X)^{-1} (X - Y), which forces X = Y by t0; the
// Girsanov weight R compensates so that Y keeps the law of the original
// equation started from eta.
//
// The 1/gamma term blows up at t0. Each step therefore splits the dynamics:
// diffusion and regular drift by Euler, then the stiff linear part on the gap
// D = X - Y by its exact flow exp(-int 1/gamma). The flow over the last step
// before t0 is exactly zero, which is where the paths merge.

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "harnack/coefficients.hpp"
#include "harnack/errors.hpp"
#include "harnack/integrator.hpp"
#include "harnack/random.hpp"
#include "harnack/segment.hpp"

namespace harnack {

struct GammaSchedule {
    double theta = 1.0;
    double k4 = 0.0;
    double t0 = 1.0;

    void validate() const {
        detail::require(theta > 0.0 && theta < 2.0, "theta must lie in (0, 2)");
        detail::require(std::isfinite(k4), "K4 must be finite");
        detail::require(std::isfinite(t0) && t0 > 0.0, "t0 must be positive");
    }

    bool small_k4() const noexcept { return std::abs(k4) * t0 < 1e-6; }
};

namespace detail {

inline void require_in_schedule(double t, const GammaSchedule& s) {
    require(t >= 0.0 && t <= s.t0 * (1.0 + 1e-14), "time lies outside [0, t0]");
}

// log|e^x - 1| without overflow for large |x|.
inline double log_abs_expm1(double x) {
    if (x > 0.0) return x + std::log1p(-std::exp(-x));
    return std::log(-std::expm1(x));
}

} // namespace detail

// gamma(t) = ((2 - theta)/K4)(1 - e^{(t - t0)K4}).
inline double gamma(double t, const GammaSchedule& s) {
    detail::require_in_schedule(t, s);
    const double u = std::max(0.0, s.t0 - t);
    if (s.small_k4()) return (2.0 - s.theta) * u * (1.0 - u * s.k4 / 2.0 + u * u * s.k4 * s.k4 / 6.0);
    return -(2.0 - s.theta) / s.k4 * std::expm1(-u * s.k4);
}

inline double gamma_derivative(double t, const GammaSchedule& s) {
    detail::require_in_schedule(t, s);
    return -(2.0 - s.theta) * std::exp((t - s.t0) * s.k4);
}

// int_{ta}^{tb} dt / gamma(t), finite for tb < t0.
inline double inv_gamma_integral(double ta, double tb, const GammaSchedule& s) {
    detail::require(0.0 <= ta && ta <= tb, "inv_gamma_integral: need 0 <= t_a <= t_b");
    if (tb >= s.t0) throw InvalidArgument("inv_gamma_integral: integral diverges for t_b >= t0; merge instead");
    if (ta == tb) return 0.0;
    const double ua = s.t0 - ta;
    const double ub = s.t0 - tb;
    const double c = 1.0 / (2.0 - s.theta);
    if (s.small_k4())
        return c * (std::log(ua / ub) + s.k4 * (ua - ub) / 2.0 + s.k4 * s.k4 * (ua * ua - ub * ub) / 24.0);
    return c * (detail::log_abs_expm1(s.k4 * ua) - detail::log_abs_expm1(s.k4 * ub));
}

// exp(-int_{ta}^{tb} 1/gamma); exactly 0 when tb reaches t0.
inline double stiff_decay_factor(double ta, double tb, const GammaSchedule& s) {
    if (tb >= s.t0 && ta < s.t0) return 0.0;
    return std::exp(-inv_gamma_integral(ta, tb, s));
}

// phi_t = sigma(Y)^{-1}(b(Y_t) - b(X_t)) - 1_{t<t0} gamma^{-1} sigma(X)^{-1}(X - Y).
template <int Dim>
Vector<Dim> coupling_drift_phi(double t, const SegmentPath<Dim>& x_seg, const SegmentPath<Dim>& y_seg,
                               const CoefficientSet<Dim>& coeffs, const GammaSchedule& sched) {
    detail::require(t >= 0.0, "coupling_drift_phi: t must be nonnegative");
    if (!x_seg.same_grid(y_seg)) throw InvalidArgument("coupling_drift_phi: segments live on different grids");
    const auto& x = x_seg.newest();
    const auto& y = y_seg.newest();
    Vector<Dim> phi = coeffs.sigma_solve(t, y, coeffs.b_delay(t, y_seg) - coeffs.b_delay(t, x_seg));
    if (t < sched.t0) phi -= coeffs.sigma_solve(t, x, x - y) / gamma(t, sched);
    return phi;
}

// Per-step quantities that depend only on (schedule, grid); shared by all
// paths of a run.
struct CouplingPlan {
    GammaSchedule schedule;
    GridSpec grid;
    long k0 = 0;                  // grid index of t0
    std::vector<double> gamma;    // gamma(t_k), k < k0
    std::vector<double> integral; // int_{t_k}^{t_{k+1}} 1/gamma, +inf for k = k0-1
    std::vector<double> decay;    // exp(-integral)

    CouplingPlan() = default;

    CouplingPlan(const GammaSchedule& sched, const GridSpec& g) : schedule(sched), grid(g) {
        sched.validate();
        const auto idx = g.index_of(sched.t0);
        detail::require(idx.has_value(), "t0 must lie on the grid");
        k0 = *idx;
        detail::require(k0 >= 1, "t0 must be at least one grid step");
        detail::require(sched.t0 <= g.horizon() - g.r0() + 1e-12 * g.horizon(), "coupling needs t0 <= T - r0");
        gamma.resize(static_cast<std::size_t>(k0));
        integral.resize(static_cast<std::size_t>(k0));
        decay.resize(static_cast<std::size_t>(k0));
        for (long k = 0; k < k0; ++k) {
            const double ta = g.time(k);
            const auto i = static_cast<std::size_t>(k);
            gamma[i] = harnack::gamma(ta, sched);
            if (k + 1 == k0) {
                integral[i] = std::numeric_limits<double>::infinity();
                decay[i] = 0.0;
            } else {
                integral[i] = inv_gamma_integral(ta, g.time(k + 1), sched);
                decay[i] = std::exp(-integral[i]);
            }
        }
    }
};

enum class Measure { P, Q };

inline std::string to_string(Measure m) { return m == Measure::P ? "P" : "Q"; }

struct CouplingOptions {
    Measure measure = Measure::Q;
    double delta_merge = 1e-8;
    bool record_paths = false; // keep X(t_k), Y(t_k) for dumps
    bool track_gaps = false;   // the segment-gap functionals below
};

template <int Dim>
struct CoupledTrajectory {
    GridSpec grid;
    Measure measure = Measure::Q;
    std::vector<Vector<Dim>> x_points; // only with record_paths
    std::vector<Vector<Dim>> y_points;

    // Running values at every grid index 0..n_T (left-point sums).
    std::vector<double> phi_sq_cum; // int_0^{t_k} |phi|^2
    std::vector<double> log_weight; // log R_{t_k}

    // With track_gaps, also indexed 0..n_T.
    std::vector<double> gap_over_gamma_cum; // int_0^{t_k ^ t0} |X-Y|^2 / gamma^2
    std::vector<double> seg_gap_sq;         // ||X_{t_k} - Y_{t_k}||_inf^2
    std::vector<double> seg_gap_sq_cum;     // int_0^{t_k} ||X_t - Y_t||_inf^2

    SegmentPath<Dim> x_terminal;
    SegmentPath<Dim> y_terminal;
    bool merged = false;
    std::optional<long> merge_step;
    std::optional<double> tau; // grid time of the merge

    double phi_sq_integral() const { return phi_sq_cum.back(); }
    double final_log_weight() const { return log_weight.back(); }
};

namespace detail {

inline bool close_enough(double gap, double x_norm, double delta) { return gap <= delta * (1.0 + x_norm); }

// max over the last m+1 values, amortized O(1) per push.
class SlidingMax {
public:
    explicit SlidingMax(long window) : window_(window) {}

    void push(long index, double value) {
        while (!q_.empty() && q_.back().second <= value) q_.pop_back();
        q_.emplace_back(index, value);
        while (q_.front().first <= index - window_) q_.pop_front();
    }

    double max() const { return q_.front().second; }

private:
    long window_;
    std::deque<std::pair<long, double>> q_;
};

// exp(-g M) (Xe - Ye) for the P-measure gap flow. M = sigma(Y) sigma(X)^{-1}.
template <int Dim>
Vector<Dim> matrix_decay(const Matrix<Dim>& M, double g, const Vector<Dim>& d) {
    if constexpr (Dim == 1) {
        return Vector<Dim>::Constant(std::exp(-g * M(0, 0)) * d(0));
    } else {
        const Matrix<Dim> A = -g * M;
        return A.exp() * d;
    }
}

template <int Dim>
bool stable_gap_matrix(const Matrix<Dim>& M) {
    if constexpr (Dim == 1) {
        return M(0, 0) > 0.0;
    } else {
        Eigen::EigenSolver<Matrix<Dim>> es(M, false);
        for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
            if (!(es.eigenvalues()(i).real() > 0.0)) return false;
        return true;
    }
}

} // namespace detail

// Joint simulation of (X, Y). Under P, X solves the original equation and Y
// the coupled one, both driven by B. Under Q, Y solves the original equation
// driven by B~ = B - int phi and X carries the compensating drift.
template <int Dim>
CoupledTrajectory<Dim> simulate_coupled(const CoefficientSet<Dim>& coeffs, const SegmentPath<Dim>& xi,
                                        const SegmentPath<Dim>& eta, const CouplingPlan& plan, std::uint64_t seed,
                                        std::uint64_t path_index, const CouplingOptions& opts) {
    const GridSpec& grid = plan.grid;
    detail::check_grid(xi, grid);
    detail::check_grid(eta, grid);
    detail::require(xi.dim() == coeffs.dim && eta.dim() == coeffs.dim, "initial segments do not match the system");
    detail::require(opts.delta_merge >= 0.0, "delta_merge must be nonnegative");

    const bool under_q = opts.measure == Measure::Q;
    const long n = grid.steps();
    const int m = grid.m();
    const double h = grid.h();
    const double sqrt_h = std::sqrt(h);
    const NoiseStream noise(seed);

    CoupledTrajectory<Dim> out;
    out.grid = grid;
    out.measure = opts.measure;
    out.phi_sq_cum.assign(static_cast<std::size_t>(n) + 1, 0.0);
    out.log_weight.assign(static_cast<std::size_t>(n) + 1, 0.0);
    if (opts.track_gaps) {
        out.gap_over_gamma_cum.assign(static_cast<std::size_t>(n) + 1, 0.0);
        out.seg_gap_sq.assign(static_cast<std::size_t>(n) + 1, 0.0);
        out.seg_gap_sq_cum.assign(static_cast<std::size_t>(n) + 1, 0.0);
    }

    SegmentPath<Dim> xs = xi;
    SegmentPath<Dim> ys = eta;
    detail::SlidingMax window(m + 1);
    if (opts.track_gaps)
        for (int i = 0; i < m; ++i) window.push(i - m, (xi[i] - eta[i]).norm());

    auto try_merge = [&](long k) {
        if (out.merged) return;
        const auto& x = xs.newest();
        const auto& y = ys.newest();
        if (!detail::close_enough((x - y).norm(), x.norm(), opts.delta_merge)) return;
        // The lagging process takes the value of the leading one.
        if (under_q)
            xs.set_newest(y);
        else
            ys.set_newest(x);
        out.merged = true;
        out.merge_step = k;
        out.tau = grid.time(k);
    };
    try_merge(0);

    auto record = [&](long k) {
        const auto i = static_cast<std::size_t>(k);
        if (opts.record_paths) {
            out.x_points.push_back(xs.newest());
            out.y_points.push_back(ys.newest());
        }
        if (opts.track_gaps) {
            window.push(k, (xs.newest() - ys.newest()).norm());
            const double g = window.max();
            out.seg_gap_sq[i] = g * g;
        }
    };
    if (opts.record_paths) {
        out.x_points.reserve(static_cast<std::size_t>(n) + 1);
        out.y_points.reserve(static_cast<std::size_t>(n) + 1);
    }
    record(0);

    Vector<Dim> dW(coeffs.dim);
    for (long k = 0; k < n; ++k) {
        const auto i = static_cast<std::size_t>(k);
        const double t = grid.time(k);
        const bool before_t0 = k < plan.k0;
        noise.increment(path_index, static_cast<std::uint64_t>(k), sqrt_h, dW);

        const Vector<Dim> x = xs.newest();
        const Vector<Dim> y = ys.newest();
        const Vector<Dim> gap = x - y;
        const Vector<Dim> bx = coeffs.b_delay(t, xs);
        const Vector<Dim> by = coeffs.b_delay(t, ys);
        const Matrix<Dim> sx = coeffs.sigma(t, x);
        const Matrix<Dim> sy = coeffs.sigma(t, y);

        // phi at the left point, so the discrete weight stays a martingale.
        const Vector<Dim> u = coeffs.sigma_solve(t, y, by - bx);
        Vector<Dim> phi = u;
        Vector<Dim> sx_inv_gap;
        if (before_t0 && !out.merged) {
            sx_inv_gap = coeffs.sigma_solve(t, x, gap);
            phi -= sx_inv_gap / plan.gamma[i];
        }
        const double phi_sq = phi.squaredNorm();
        out.phi_sq_cum[i + 1] = out.phi_sq_cum[i] + phi_sq * h;
        out.log_weight[i + 1] = out.log_weight[i] + phi.dot(dW) + (under_q ? 0.5 : -0.5) * phi_sq * h;
        if (opts.track_gaps) {
            const double gg = before_t0 ? gap.squaredNorm() / (plan.gamma[i] * plan.gamma[i]) : 0.0;
            out.gap_over_gamma_cum[i + 1] = out.gap_over_gamma_cum[i] + gg * h;
            out.seg_gap_sq_cum[i + 1] = out.seg_gap_sq_cum[i] + out.seg_gap_sq[i] * h;
        }

        Vector<Dim> x_new, y_new;
        if (under_q) {
            y_new = y + (coeffs.z_drift(t, y) + by) * h + sy * dW;
            if (out.merged) {
                x_new = y_new;
            } else {
                const Vector<Dim> xe = x + ((sx - sy) * u + coeffs.z_drift(t, x) + by) * h + sx * dW;
                detail::check_finite<Dim>(xe, k + 1);
                x_new = before_t0 ? Vector<Dim>(y_new + plan.decay[i] * (xe - y_new)) : xe;
            }
        } else {
            x_new = x + (coeffs.z_drift(t, x) + bx) * h + sx * dW;
            if (out.merged) {
                y_new = x_new;
            } else {
                const Vector<Dim> ye = y + (coeffs.z_drift(t, y) + bx) * h + sy * dW;
                detail::check_finite<Dim>(ye, k + 1);
                y_new = ye;
                if (before_t0) {
                    const Matrix<Dim> M = sy * coeffs.sigma_inv(t, x);
                    if (k + 1 < plan.k0)
                        y_new = x_new - detail::matrix_decay<Dim>(M, plan.integral[i], x_new - ye);
                    else if (detail::stable_gap_matrix<Dim>(M))
                        y_new = x_new;
                }
            }
        }
        detail::check_finite<Dim>(x_new, k + 1);
        detail::check_finite<Dim>(y_new, k + 1);
        xs.roll(x_new);
        ys.roll(y_new);
        try_merge(k + 1);
        record(k + 1);
    }
    out.x_terminal = std::move(xs);
    out.y_terminal = std::move(ys);
    return out;
}

template <int Dim>
CoupledTrajectory<Dim> simulate_coupled_Q(const CoefficientSet<Dim>& coeffs, const SegmentPath<Dim>& xi,
                                          const SegmentPath<Dim>& eta, const CouplingPlan& plan, std::uint64_t seed,
                                          std::uint64_t path_index, CouplingOptions opts = {}) {
    opts.measure = Measure::Q;
    return simulate_coupled<Dim>(coeffs, xi, eta, plan, seed, path_index, opts);
}

template <int Dim>
CoupledTrajectory<Dim> simulate_coupled_P(const CoefficientSet<Dim>& coeffs, const SegmentPath<Dim>& xi,
                                          const SegmentPath<Dim>& eta, const CouplingPlan& plan, std::uint64_t seed,
                                          std::uint64_t path_index, CouplingOptions opts = {}) {
    opts.measure = Measure::P;
    return simulate_coupled<Dim>(coeffs, xi, eta, plan, seed, path_index, opts);
}

// First recorded grid time with |X - Y| <= delta (1 + |X|). Needs
// record_paths.
template <int Dim>
std::optional<double> coupling_time(const CoupledTrajectory<Dim>& traj, double delta) {
    detail::require(delta >= 0.0, "coupling_time: delta must be nonnegative");
    detail::require(!traj.x_points.empty(), "coupling_time: trajectory was simulated without record_paths");
    for (std::size_t k = 0; k < traj.x_points.size(); ++k) {
        const auto& x = traj.x_points[k];
        if (detail::close_enough((x - traj.y_points[k]).norm(), x.norm(), delta))
            return traj.grid.time(static_cast<long>(k));
    }
    return std::nullopt;
}

// Rows "step,t,x1..xd,y1..yd,gap,gamma,phi_sq,log_weight"; gamma is empty
// from t0 on and phi_sq is |phi_k|^2 on [t_k, t_{k+1}).
template <int Dim>
void write_coupled_csv(std::ostream& out, const CoupledTrajectory<Dim>& traj, const CouplingPlan& plan) {
    detail::require(!traj.x_points.empty(), "coupled dump needs record_paths");
    const int d = static_cast<int>(traj.x_points.front().size());
    out << "step,t";
    for (int j = 0; j < d; ++j) out << ",x" << (j + 1);
    for (int j = 0; j < d; ++j) out << ",y" << (j + 1);
    out << ",gap,gamma,phi_sq,log_weight\n";
    const double h = traj.grid.h();
    for (std::size_t k = 0; k < traj.x_points.size(); ++k) {
        out << k << ',' << format_double(traj.grid.time(static_cast<long>(k)));
        for (int j = 0; j < d; ++j) out << ',' << format_double(traj.x_points[k](j));
        for (int j = 0; j < d; ++j) out << ',' << format_double(traj.y_points[k](j));
        out << ',' << format_double((traj.x_points[k] - traj.y_points[k]).norm()) << ',';
        if (static_cast<long>(k) < plan.k0) out << format_double(plan.gamma[k]);
        out << ',';
        if (k + 1 < traj.phi_sq_cum.size())
            out << format_double((traj.phi_sq_cum[k + 1] - traj.phi_sq_cum[k]) / h);
        out << ',' << format_double(traj.log_weight[k]) << '\n';
    }
}

} // namespace harnack
