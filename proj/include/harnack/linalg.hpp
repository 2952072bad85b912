#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "harnack/errors.hpp"

namespace harnack {

template <int Dim>
using Vector = Eigen::Matrix<double, Dim, 1>;

template <int Dim>
using Matrix = Eigen::Matrix<double, Dim, Dim>;

// Solves m * x = rhs, throwing SingularDiffusion when m is not invertible.
template <int Dim>
Vector<Dim> checked_solve(const Matrix<Dim>& m, const Vector<Dim>& rhs) {
    if constexpr (Dim == 1) {
        const double a = m(0, 0);
        if (!(a != 0.0) || !std::isfinite(a)) throw SingularDiffusion("diffusion coefficient is singular");
        return Vector<Dim>::Constant(rhs(0) / a);
    } else if constexpr (Dim != Eigen::Dynamic && Dim <= 4) {
        Matrix<Dim> inv;
        bool invertible = false;
        m.computeInverseWithCheck(inv, invertible, 1e-300);
        if (!invertible || !inv.allFinite()) throw SingularDiffusion("diffusion coefficient is singular");
        return inv * rhs;
    } else {
        Eigen::FullPivLU<Matrix<Dim>> lu(m);
        if (!lu.isInvertible()) throw SingularDiffusion("diffusion coefficient is singular");
        return lu.solve(rhs);
    }
}

template <int Dim>
Matrix<Dim> checked_inverse(const Matrix<Dim>& m) {
    if constexpr (Dim == 1) {
        const double a = m(0, 0);
        if (!(a != 0.0) || !std::isfinite(a)) throw SingularDiffusion("diffusion coefficient is singular");
        return Matrix<Dim>::Constant(1.0 / a);
    } else {
        Eigen::FullPivLU<Matrix<Dim>> lu(m);
        if (!lu.isInvertible()) throw SingularDiffusion("diffusion coefficient is singular");
        return lu.inverse();
    }
}

// Largest singular value.
template <int Dim>
double operator_norm(const Matrix<Dim>& m) {
    if constexpr (Dim == 1) {
        return std::abs(m(0, 0));
    } else {
        if (m.size() == 1) return std::abs(m(0, 0));
        Eigen::JacobiSVD<Matrix<Dim>> svd(m);
        return svd.singularValues()(0);
    }
}

template <int Dim>
double hilbert_schmidt_norm_sq(const Matrix<Dim>& m) {
    return m.squaredNorm();
}

} // namespace harnack
