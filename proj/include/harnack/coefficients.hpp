#pragma once

// Coefficient triple (sigma, Z, b) of the delay equation
//
//   dX(t) = {Z(t, X(t)) + b(t, X_t)} dt + sigma(t, X(t)) dB(t),
//
// its declared assumption constants K1..K4, a catalog of test systems and a
// sampling auditor for the constants.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "harnack/errors.hpp"
#include "harnack/format.hpp"
#include "harnack/linalg.hpp"
#include "harnack/random.hpp"
#include "harnack/segment.hpp"

namespace harnack {

// K1: Lipschitz bound of sigma^{-1} b in the segment, K2: diffusion
// Lipschitz bound, K3: bound on |sigma^{-1}|, K4: one-sided dissipativity.
struct AssumptionConstants {
    double k1 = 0.0;
    double k2 = 0.0;
    double k3 = 1.0;
    double k4 = 0.0;

    void validate() const {
        detail::require(std::isfinite(k1) && std::isfinite(k2) && std::isfinite(k3) && std::isfinite(k4),
                        "assumption constants must be finite");
        detail::require(k1 >= 0.0, "K1 must be nonnegative");
        detail::require(k2 >= 0.0, "K2 must be nonnegative");
        detail::require(k3 > 0.0, "K3 must be positive");
    }

    friend bool operator==(const AssumptionConstants&, const AssumptionConstants&) = default;
};

template <int Dim>
struct CoefficientSet {
    using Point = Vector<Dim>;
    using Mat = Matrix<Dim>;
    using Segment = SegmentPath<Dim>;

    std::string name;
    int dim = 1;
    std::function<Mat(double, const Point&)> sigma;
    std::function<Point(double, const Point&)> z_drift;
    std::function<Point(double, const Segment&)> b_delay;
    // Optional explicit inverse; skips the linear solve when present.
    std::function<Mat(double, const Point&)> sigma_inverse;
    AssumptionConstants constants;
    bool delay_free = false;
    bool autonomous = false;

    // sigma(t, x)^{-1} rhs.
    Point sigma_solve(double t, const Point& x, const Point& rhs) const {
        if (sigma_inverse) return sigma_inverse(t, x) * rhs;
        return checked_solve<Dim>(sigma(t, x), rhs);
    }

    Mat sigma_inv(double t, const Point& x) const {
        if (sigma_inverse) return sigma_inverse(t, x);
        return checked_inverse<Dim>(sigma(t, x));
    }
};

// Copy of coeffs with sigma multiplied by factor (factor 0 gives the
// deterministic skeleton used in tests). The explicit inverse is dropped.
template <int Dim>
CoefficientSet<Dim> scale_noise(CoefficientSet<Dim> coeffs, double factor) {
    auto base = coeffs.sigma;
    coeffs.sigma = [base, factor](double t, const Vector<Dim>& x) -> Matrix<Dim> { return factor * base(t, x); };
    coeffs.sigma_inverse = nullptr;
    coeffs.name += "*noise" + format_double(factor);
    return coeffs;
}

using SystemParams = std::map<std::string, double>;

template <int Dim>
struct SystemFactory {
    std::vector<std::string> parameters;
    std::function<CoefficientSet<Dim>(const SystemParams&, int dim)> make;
};

namespace detail {

inline double param(const SystemParams& params, const std::string& key) {
    const auto it = params.find(key);
    if (it == params.end()) throw InvalidArgument("missing system parameter '" + key + "'");
    return it->second;
}

template <int Dim>
Vector<Dim> zero_vector(int dim) {
    return Vector<Dim>::Zero(dim);
}

template <int Dim>
Matrix<Dim> scaled_identity(int dim, double s) {
    return s * Matrix<Dim>::Identity(dim, dim);
}

template <int Dim>
int checked_dim(int dim) {
    detail::require(dim >= 1, "system dimension must be positive");
    if constexpr (Dim != Eigen::Dynamic) detail::require(dim == Dim, "system dimension does not match the build");
    return dim;
}

template <int Dim>
CoefficientSet<Dim> linear_additive(const SystemParams& params, int dim) {
    const double a = param(params, "a");
    const double c = param(params, "c");
    const double s0 = param(params, "s0");
    require(s0 > 0.0, "linear_additive: s0 must be positive");
    CoefficientSet<Dim> cs;
    cs.name = "linear_additive";
    cs.dim = checked_dim<Dim>(dim);
    cs.sigma = [dim, s0](double, const Vector<Dim>&) { return scaled_identity<Dim>(dim, s0); };
    cs.sigma_inverse = [dim, s0](double, const Vector<Dim>&) { return scaled_identity<Dim>(dim, 1.0 / s0); };
    cs.z_drift = [a](double, const Vector<Dim>& x) -> Vector<Dim> { return a * x; };
    cs.b_delay = [c](double, const SegmentPath<Dim>& seg) -> Vector<Dim> { return c * seg.oldest(); };
    cs.constants = {std::abs(c) / s0, 0.0, 1.0 / s0, 2.0 * a};
    cs.autonomous = true;
    return cs;
}

template <int Dim>
CoefficientSet<Dim> sine_multiplicative(const SystemParams& params, int dim) {
    const double a = param(params, "a");
    const double c = param(params, "c");
    const double s0 = param(params, "s0");
    require(s0 > 0.0, "sine_multiplicative: s0 must be positive");
    require(dim == 1, "sine_multiplicative is defined for d = 1 only");
    CoefficientSet<Dim> cs;
    cs.name = "sine_multiplicative";
    cs.dim = checked_dim<Dim>(dim);
    cs.sigma = [s0](double, const Vector<Dim>& x) -> Matrix<Dim> {
        return Matrix<Dim>::Constant(1, 1, s0 * (2.0 + std::sin(x(0))));
    };
    cs.sigma_inverse = [s0](double, const Vector<Dim>& x) -> Matrix<Dim> {
        return Matrix<Dim>::Constant(1, 1, 1.0 / (s0 * (2.0 + std::sin(x(0)))));
    };
    cs.z_drift = [a](double, const Vector<Dim>& x) -> Vector<Dim> { return a * x; };
    cs.b_delay = [c](double, const SegmentPath<Dim>& seg) -> Vector<Dim> { return c * seg.oldest(); };
    // |sin x - sin y| <= min(|x - y|, 2) <= 2 (1 ^ |x - y|).
    cs.constants = {std::abs(c) / s0, 2.0 * s0, 1.0 / s0, s0 * s0 + 2.0 * a};
    cs.autonomous = true;
    return cs;
}

template <int Dim>
CoefficientSet<Dim> ou_nodelay(const SystemParams& params, int dim) {
    const double a = param(params, "a");
    const double s0 = param(params, "s0");
    require(s0 > 0.0, "ou_nodelay: s0 must be positive");
    CoefficientSet<Dim> cs;
    cs.name = "ou_nodelay";
    cs.dim = checked_dim<Dim>(dim);
    cs.sigma = [dim, s0](double, const Vector<Dim>&) { return scaled_identity<Dim>(dim, s0); };
    cs.sigma_inverse = [dim, s0](double, const Vector<Dim>&) { return scaled_identity<Dim>(dim, 1.0 / s0); };
    cs.z_drift = [a](double, const Vector<Dim>& x) -> Vector<Dim> { return -a * x; };
    cs.b_delay = [dim](double, const SegmentPath<Dim>&) { return zero_vector<Dim>(dim); };
    cs.constants = {0.0, 0.0, 1.0 / s0, -2.0 * a};
    cs.delay_free = true;
    cs.autonomous = true;
    return cs;
}

} // namespace detail

// Name -> factory. Prepopulated with the catalog; register_system adds
// user-supplied coefficient plugins under a new id.
template <int Dim>
std::map<std::string, SystemFactory<Dim>>& system_registry() {
    static std::map<std::string, SystemFactory<Dim>> registry{
        {"linear_additive", {{"a", "c", "s0"}, &detail::linear_additive<Dim>}},
        {"sine_multiplicative", {{"a", "c", "s0"}, &detail::sine_multiplicative<Dim>}},
        {"ou_nodelay", {{"a", "s0"}, &detail::ou_nodelay<Dim>}},
    };
    return registry;
}

template <int Dim>
void register_system(const std::string& name, SystemFactory<Dim> factory) {
    system_registry<Dim>()[name] = std::move(factory);
}

template <int Dim>
CoefficientSet<Dim> builtin_system(const std::string& name, const SystemParams& params,
                                   int dim = Dim == Eigen::Dynamic ? 1 : Dim) {
    const auto& registry = system_registry<Dim>();
    const auto it = registry.find(name);
    if (it == registry.end()) throw InvalidArgument("unknown system '" + name + "'");
    const std::set<std::string> allowed(it->second.parameters.begin(), it->second.parameters.end());
    for (const auto& [key, value] : params) {
        if (!allowed.count(key)) throw InvalidArgument("system '" + name + "' has no parameter '" + key + "'");
        if (!std::isfinite(value)) throw InvalidArgument("system parameter '" + key + "' is not finite");
    }
    for (const auto& key : it->second.parameters) detail::param(params, key);
    auto cs = it->second.make(params, dim);
    cs.constants.validate();
    return cs;
}

// ---------------------------------------------------------------------------
// Audit

struct AuditBox {
    double t_max = 1.0;
    double half_width = 5.0; // x, y and segment values uniform in [-w, w]^d
    double r0 = 1.0;
    int m = 8;               // grid of sampled segments
};

struct ConditionAudit {
    std::string condition;  // "A1".."A4"
    double empirical_max = -std::numeric_limits<double>::infinity();
    double declared = 0.0;
    long samples = 0;
    bool pass = true;
    std::string note;       // location of the worst sample or of a failure
};

struct AuditReport {
    std::vector<ConditionAudit> conditions;
    double slack = 0.0;
    long samples = 0;
    std::uint64_t seed = 0;
    bool all_pass() const {
        return std::all_of(conditions.begin(), conditions.end(), [](const auto& c) { return c.pass; });
    }
    static constexpr const char* caveat =
        "sampling can falsify the declared constants but never proves the assumption";
};

namespace detail {

inline bool within_declared(double empirical, double declared, double slack) {
    return empirical <= declared + slack * std::abs(declared);
}

} // namespace detail

// Draws n random tuples (t, x, y, xi, eta) from the box and records the
// largest ratio for each condition.
template <int Dim>
AuditReport audit_assumptions(const CoefficientSet<Dim>& coeffs, const AuditBox& box, long n, std::uint64_t seed,
                              double slack = 1e-6) {
    detail::require(n >= 1, "audit: n must be at least 1");
    detail::require(std::isfinite(box.half_width) && box.half_width > 0.0 && std::isfinite(box.t_max) &&
                        box.t_max >= 0.0 && box.m >= 1 && box.r0 > 0.0,
                    "audit: sampling box must be bounded");
    const int d = coeffs.dim;
    const auto& k = coeffs.constants;
    AuditReport report;
    report.slack = slack;
    report.samples = n;
    report.seed = seed;
    report.conditions = {{"A1", -INFINITY, k.k1, 0, true, {}},
                         {"A2", -INFINITY, k.k2, 0, true, {}},
                         {"A3", -INFINITY, k.k3, 0, true, {}},
                         {"A4", -INFINITY, k.k4, 0, true, {}}};

    const CounterStream stream(derive_seed(seed, 0xA0D17));
    const int seg_points = box.m + 1;
    std::vector<double> u(static_cast<std::size_t>(1 + 2 * d + 2 * seg_points * d));
    auto coord = [&](std::size_t i) { return box.half_width * (2.0 * u[i] - 1.0); };

    for (long i = 0; i < n; ++i) {
        stream.uniforms(static_cast<std::uint64_t>(i), 0, u);
        const double t = box.t_max * u[0];
        Vector<Dim> x(d), y(d);
        for (int j = 0; j < d; ++j) {
            x(j) = coord(1 + j);
            y(j) = coord(1 + d + j);
        }
        std::vector<Vector<Dim>> xs, es;
        std::size_t base = 1 + 2 * static_cast<std::size_t>(d);
        for (int p = 0; p < seg_points; ++p) {
            Vector<Dim> a(d), b(d);
            for (int j = 0; j < d; ++j) {
                a(j) = coord(base + static_cast<std::size_t>(p * d + j));
                b(j) = coord(base + static_cast<std::size_t>((seg_points + p) * d + j));
            }
            xs.push_back(a);
            es.push_back(b);
        }
        const SegmentPath<Dim> xi(box.r0, std::move(xs)), eta(box.r0, std::move(es));
        const std::string where = "t=" + format_double(t) + " sample=" + std::to_string(i);

        auto record = [&](ConditionAudit& c, double ratio) {
            ++c.samples;
            if (ratio > c.empirical_max) {
                c.empirical_max = ratio;
                c.note = where;
            }
        };

        const auto sx = coeffs.sigma(t, x);
        const auto sy = coeffs.sigma(t, y);
        const double gap = (x - y).norm();

        // bound on the inverse diffusion
        Matrix<Dim> sx_inv;
        try {
            sx_inv = checked_inverse<Dim>(sx);
            record(report.conditions[2], operator_norm<Dim>(sx_inv));
        } catch (const SingularDiffusion&) {
            auto& c = report.conditions[2];
            ++c.samples;
            c.pass = false;
            c.empirical_max = INFINITY;
            c.note = "singular sigma at " + where;
        }
        // delay drift, scaled by the inverse diffusion
        try {
            const Vector<Dim> diff = coeffs.b_delay(t, xi) - coeffs.b_delay(t, eta);
            const auto num = checked_solve<Dim>(coeffs.sigma(t, eta.newest()), diff).norm();
            record(report.conditions[0], num / sup_distance(xi, eta));
        } catch (const SingularDiffusion&) {
            auto& c = report.conditions[2];
            c.pass = false;
            c.empirical_max = INFINITY;
            c.note = "singular sigma at eta(0), " + where;
        }
        // diffusion modulus uses the operator norm, monotonicity the Hilbert-Schmidt norm.
        if (gap > 0.0) {
            const Matrix<Dim> ds = sx - sy;
            record(report.conditions[1], operator_norm<Dim>(ds) / std::min(1.0, gap));
            const double a4 = hilbert_schmidt_norm_sq<Dim>(ds) +
                              2.0 * (x - y).dot(coeffs.z_drift(t, x) - coeffs.z_drift(t, y));
            record(report.conditions[3], a4 / (gap * gap));
        }
    }
    for (auto& c : report.conditions) {
        if (c.pass) c.pass = detail::within_declared(c.empirical_max, c.declared, slack);
    }
    return report;
}

} // namespace harnack
