#pragma once

// Euler-Maruyama for the uncoupled functional SDE. The delay term is read
// off the rolling grid segment, so no interpolation is needed.

#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

#include "harnack/coefficients.hpp"
#include "harnack/errors.hpp"
#include "harnack/random.hpp"
#include "harnack/segment.hpp"

namespace harnack {

template <int Dim>
Vector<Dim> step_euler(double t, const Vector<Dim>& x, const SegmentPath<Dim>& seg, const Vector<Dim>& dW, double h,
                       const CoefficientSet<Dim>& coeffs) {
    detail::require(h > 0.0, "step_euler: h must be positive");
    detail::require(dW.allFinite(), "step_euler: non-finite Brownian increment");
    return x + (coeffs.z_drift(t, x) + coeffs.b_delay(t, seg)) * h + coeffs.sigma(t, x) * dW;
}

template <int Dim>
struct Trajectory {
    GridSpec grid;
    SegmentPath<Dim> initial;
    std::vector<Vector<Dim>> points;                    // X(t_k), k = 0..n_T
    std::optional<std::vector<Vector<Dim>>> increments; // dW_k, k = 0..n_T-1

    // Segment X_{t_k}: the m+1 values ending at step k, reaching back into
    // the initial segment when k < m.
    SegmentPath<Dim> segment_at(long k) const {
        detail::require(k >= 0 && k < static_cast<long>(points.size()), "trajectory: step out of range");
        const int m = initial.m();
        std::vector<Vector<Dim>> values;
        values.reserve(static_cast<std::size_t>(m) + 1);
        for (long j = k - m; j <= k; ++j) {
            if (j <= 0)
                values.push_back(initial[static_cast<int>(j + m)]);
            else
                values.push_back(points[static_cast<std::size_t>(j)]);
        }
        return SegmentPath<Dim>(initial.r0(), std::move(values));
    }

    SegmentPath<Dim> terminal_segment() const { return segment_at(static_cast<long>(points.size()) - 1); }
};

namespace detail {

template <int Dim>
void check_grid(const SegmentPath<Dim>& seg, const GridSpec& grid) {
    require(seg.m() == grid.m() && std::abs(seg.r0() - grid.r0()) <= 1e-12 * grid.r0(),
            "initial segment does not live on the simulation grid");
}

template <int Dim>
void check_finite(const Vector<Dim>& x, long step) {
    if (!x.allFinite()) throw NonFiniteState("state became non-finite", step);
}

} // namespace detail

// Runs one path and calls visit(k, x_k) after each step k = 1..n_T. Returns
// the terminal segment X_T. This is the allocation-free core shared by
// simulate_path and the estimators.
template <int Dim, class Visit>
SegmentPath<Dim> run_path(const CoefficientSet<Dim>& coeffs, SegmentPath<Dim> seg, const GridSpec& grid,
                          std::uint64_t seed, std::uint64_t path_index, Visit&& visit) {
    detail::check_grid(seg, grid);
    detail::require(seg.dim() == coeffs.dim, "initial segment dimension differs from the system");
    const NoiseStream noise(seed);
    const double h = grid.h();
    const double sqrt_h = std::sqrt(h);
    Vector<Dim> dW(coeffs.dim);
    for (long k = 0; k < grid.steps(); ++k) {
        noise.increment(path_index, static_cast<std::uint64_t>(k), sqrt_h, dW);
        Vector<Dim> next = step_euler<Dim>(grid.time(k), seg.newest(), seg, dW, h, coeffs);
        detail::check_finite<Dim>(next, k + 1);
        visit(k + 1, next, dW);
        seg.roll(next);
    }
    return seg;
}

template <int Dim>
Trajectory<Dim> simulate_path(const CoefficientSet<Dim>& coeffs, const SegmentPath<Dim>& xi, const GridSpec& grid,
                              std::uint64_t seed, std::uint64_t path_index, bool record_increments = false) {
    Trajectory<Dim> traj;
    traj.grid = grid;
    traj.initial = xi;
    traj.points.reserve(static_cast<std::size_t>(grid.steps()) + 1);
    traj.points.push_back(xi.newest());
    if (record_increments) traj.increments.emplace().reserve(static_cast<std::size_t>(grid.steps()));
    run_path<Dim>(coeffs, xi, grid, seed, path_index, [&](long, const Vector<Dim>& x, const Vector<Dim>& dW) {
        traj.points.push_back(x);
        if (record_increments) traj.increments->push_back(dW);
    });
    return traj;
}

// Rows "step,t,x1..xd".
template <int Dim>
void write_trajectory_csv(std::ostream& out, const Trajectory<Dim>& traj) {
    out << "step,t";
    for (int j = 0; j < traj.initial.dim(); ++j) out << ",x" << (j + 1);
    out << '\n';
    for (std::size_t k = 0; k < traj.points.size(); ++k) {
        out << k << ',' << format_double(traj.grid.time(static_cast<long>(k)));
        for (int j = 0; j < traj.initial.dim(); ++j) out << ',' << format_double(traj.points[k](j));
        out << '\n';
    }
}

} // namespace harnack
