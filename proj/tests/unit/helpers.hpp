#pragma once

#include <catch_amalgamated.hpp>

#include "harnack/harnack.hpp"

namespace harnack::test {

inline Vector<1> v1(double x) {
    Vector<1> v;
    v(0) = x;
    return v;
}

inline SegmentPath<1> flat(double r0, int m, double x) { return SegmentPath<1>::constant(r0, m, v1(x)); }

inline SegmentPath<1> from_values(double r0, std::initializer_list<double> xs) {
    std::vector<Vector<1>> v;
    for (double x : xs) v.push_back(v1(x));
    return SegmentPath<1>(r0, std::move(v));
}

// d = 1 system built from plain lambdas.
inline CoefficientSet<1> scalar_system(std::function<double(double)> z, std::function<double(const SegmentPath<1>&)> b,
                                       double s) {
    CoefficientSet<1> c;
    c.name = "scalar";
    c.dim = 1;
    c.sigma = [s](double, const Vector<1>&) {
        Matrix<1> m;
        m(0, 0) = s;
        return m;
    };
    c.z_drift = [z](double, const Vector<1>& x) { return v1(z(x(0))); };
    c.b_delay = [b](double, const SegmentPath<1>& seg) { return v1(b(seg)); };
    c.constants = {0.0, 0.0, s > 0.0 ? 1.0 / s : 1.0, 0.0};
    c.delay_free = true;
    c.autonomous = true;
    return c;
}

inline SystemParams linear_params(double a, double c, double s0) { return {{"a", a}, {"c", c}, {"s0", s0}}; }

} // namespace harnack::test
