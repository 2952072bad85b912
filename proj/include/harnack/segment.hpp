#pragma once

// Discretized segment space C([-r0, 0]; R^d) with the uniform norm, and the
// time grid shared by every simulation.

#include <algorithm>
#include <cmath>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "harnack/errors.hpp"
#include "harnack/format.hpp"
#include "harnack/linalg.hpp"

namespace harnack {

// Uniform grid with h = r0 / m. T and t0 must be integer multiples of h.
class GridSpec {
public:
    GridSpec() = default;

    GridSpec(double r0, double horizon, int m) : r0_(r0), horizon_(horizon), m_(m) {
        detail::require(std::isfinite(r0) && r0 > 0.0, "grid: r0 must be positive and finite");
        detail::require(m >= 1, "grid: m (steps per delay) must be a positive integer");
        detail::require(std::isfinite(horizon) && horizon > 0.0, "grid: T must be positive and finite");
        const double steps = horizon / h();
        steps_ = static_cast<long>(std::llround(steps));
        detail::require(steps_ >= 1 && std::abs(static_cast<double>(steps_) * h() - horizon) <= 1e-12 * horizon,
                        "grid: T must be an integer multiple of h = r0/m");
    }

    double r0() const noexcept { return r0_; }
    double horizon() const noexcept { return horizon_; }
    int m() const noexcept { return m_; }
    double h() const noexcept { return r0_ / m_; }
    long steps() const noexcept { return steps_; }

    double time(long k) const noexcept { return static_cast<double>(k) * r0_ / m_; }

    // Grid index of t, or nothing when t is off the grid.
    std::optional<long> index_of(double t) const {
        const long k = static_cast<long>(std::llround(t / h()));
        if (std::abs(static_cast<double>(k) * h() - t) > 1e-12 * std::max(1.0, std::abs(t))) return std::nullopt;
        return k;
    }

    GridSpec with_horizon(double horizon) const { return GridSpec(r0_, horizon, m_); }

private:
    double r0_ = 1.0;
    double horizon_ = 1.0;
    int m_ = 1;
    long steps_ = 1;
};

// Values of a path on the m+1 grid times -r0, -r0+h, ..., 0. Index 0 is the
// oldest value (relative time -r0) and index m the newest (relative time 0).
// Storage is a ring so that rolling the window forward is O(1).
template <int Dim>
class SegmentPath {
public:
    using Point = Vector<Dim>;

    SegmentPath() = default;

    SegmentPath(double r0, std::vector<Point> values) : r0_(r0), values_(std::move(values)) {
        detail::require(std::isfinite(r0) && r0 > 0.0, "segment: r0 must be positive");
        detail::require(values_.size() >= 2, "segment: need at least two grid values (m >= 1)");
        const auto d = values_.front().size();
        detail::require(d >= 1, "segment: dimension must be positive");
        for (const auto& v : values_) {
            detail::require(v.size() == d, "segment: inconsistent point dimensions");
            detail::require(v.allFinite(), "segment: non-finite value");
        }
    }

    static SegmentPath constant(double r0, int m, const Point& value) {
        return SegmentPath(r0, std::vector<Point>(static_cast<std::size_t>(m) + 1, value));
    }

    int dim() const noexcept { return static_cast<int>(values_.front().size()); }
    int m() const noexcept { return static_cast<int>(values_.size()) - 1; }
    double r0() const noexcept { return r0_; }
    double h() const noexcept { return r0_ / m(); }
    double time_offset(int i) const noexcept { return -r0_ + static_cast<double>(i) * r0_ / m(); }

    const Point& operator[](int i) const noexcept { return values_[physical(i)]; }
    const Point& oldest() const noexcept { return values_[head_]; }
    const Point& newest() const noexcept { return values_[physical(m())]; }

    // Drops the oldest value and appends p at relative time 0.
    void roll(const Point& p) {
        values_[head_] = p;
        head_ = (head_ + 1 == values_.size()) ? 0 : head_ + 1;
    }

    void set_newest(const Point& p) { values_[physical(m())] = p; }

    bool same_grid(const SegmentPath& other) const noexcept {
        return m() == other.m() && r0_ == other.r0_ && dim() == other.dim();
    }

    std::vector<Point> values() const {
        std::vector<Point> out;
        out.reserve(values_.size());
        for (int i = 0; i <= m(); ++i) out.push_back((*this)[i]);
        return out;
    }

private:
    std::size_t physical(int i) const noexcept {
        const std::size_t j = head_ + static_cast<std::size_t>(i);
        return j >= values_.size() ? j - values_.size() : j;
    }

    double r0_ = 1.0;
    std::vector<Point> values_;
    std::size_t head_ = 0;
};

template <int Dim>
SegmentPath<Dim> segment_from_function(const std::function<Vector<Dim>(double)>& f, double r0, int m) {
    detail::require(m >= 1, "segment: m must be a positive integer");
    std::vector<Vector<Dim>> values;
    values.reserve(static_cast<std::size_t>(m) + 1);
    for (int i = 0; i <= m; ++i) {
        const double u = -r0 + static_cast<double>(i) * r0 / m;
        Vector<Dim> v = f(i == m ? 0.0 : u);
        if (!v.allFinite()) throw InvalidArgument("segment: initial function is not finite at u = " + format_double(u));
        values.push_back(std::move(v));
    }
    return SegmentPath<Dim>(r0, std::move(values));
}

// Scalar convenience for d = 1.
inline SegmentPath<1> segment_from_function(const std::function<double(double)>& f, double r0, int m) {
    return segment_from_function<1>([&](double u) { return Vector<1>::Constant(f(u)); }, r0, m);
}

// Uniform distance over grid points.
template <int Dim>
double sup_distance(const SegmentPath<Dim>& a, const SegmentPath<Dim>& b) {
    if (!a.same_grid(b)) throw InvalidArgument("sup_distance: segments live on different grids");
    double best = 0.0;
    for (int i = 0; i <= a.m(); ++i) best = std::max(best, (a[i] - b[i]).norm());
    return best;
}

template <int Dim>
SegmentPath<Dim> shift_append(SegmentPath<Dim> history, const Vector<Dim>& new_point) {
    if (!new_point.allFinite()) throw InvalidArgument("shift_append: non-finite point");
    if (new_point.size() != history.dim()) throw InvalidArgument("shift_append: dimension mismatch");
    history.roll(new_point);
    return history;
}

// CSV rows "offset,x1,...,xd", one per grid point, oldest first.
template <int Dim>
void write_segment_csv(std::ostream& out, const SegmentPath<Dim>& seg) {
    out << "offset";
    for (int k = 0; k < seg.dim(); ++k) out << ",x" << (k + 1);
    out << '\n';
    for (int i = 0; i <= seg.m(); ++i) {
        out << format_double(seg.time_offset(i));
        for (int k = 0; k < seg.dim(); ++k) out << ',' << format_double(seg[i](k));
        out << '\n';
    }
}

// Reads the format written by write_segment_csv. The offsets must form a
// uniform grid ending at 0; r0 is taken from the first row.
template <int Dim>
SegmentPath<Dim> read_segment_csv(std::istream& in) {
    std::string line;
    std::vector<double> offsets;
    std::vector<Vector<Dim>> values;
    int dim = -1;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (line.rfind("offset", 0) == 0) continue;
        std::vector<double> fields;
        std::stringstream row(line);
        std::string cell;
        while (std::getline(row, cell, ',')) fields.push_back(parse_double(cell));
        if (fields.size() < 2) throw InvalidArgument("segment csv: expected offset and at least one coordinate");
        const int d = static_cast<int>(fields.size()) - 1;
        if (dim < 0) dim = d;
        if (d != dim) throw InvalidArgument("segment csv: inconsistent column count");
        if (Dim != Eigen::Dynamic && d != Dim) throw InvalidArgument("segment csv: dimension does not match");
        Vector<Dim> v(d);
        for (int k = 0; k < d; ++k) v(k) = fields[static_cast<std::size_t>(k) + 1];
        offsets.push_back(fields[0]);
        values.push_back(std::move(v));
    }
    if (values.size() < 2) throw InvalidArgument("segment csv: need at least two rows");
    const double r0 = -offsets.front();
    const int m = static_cast<int>(values.size()) - 1;
    for (int i = 0; i <= m; ++i) {
        const double expected = -r0 + static_cast<double>(i) * r0 / m;
        if (std::abs(offsets[static_cast<std::size_t>(i)] - expected) > 1e-9 * std::max(1.0, r0))
            throw InvalidArgument("segment csv: offsets must be a uniform grid from -r0 to 0");
    }
    return SegmentPath<Dim>(r0, std::move(values));
}

} // namespace harnack
