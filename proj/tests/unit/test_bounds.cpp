#include "helpers.hpp"

using namespace harnack;

namespace {
const AssumptionConstants kEx{1, 0, 1, 1};
const GapPair kUnit{1, 1};

// Independent brute-force minimum of a 1-d function on a fine uniform grid.
double dense_min(const std::function<double(double)>& f, double lo, double hi, int n) {
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= n; ++i) best = std::min(best, f(lo + (hi - lo) * i / n));
    return best;
}
} // namespace

TEST_CASE("k4 ratio") {
    CHECK(k4_ratio(0.0, 1.0) == 1.0);
    CHECK(k4_ratio(1.0, 1.0) == Catch::Approx(1.581977).epsilon(1e-6));
    CHECK(k4_ratio(-1.0, 1.0) == Catch::Approx(0.581977).epsilon(1e-6));
    for (double s : {0.1, 1.0, 10.0}) CHECK(k4_ratio(1e-8, s) == Catch::Approx(1.0 / s).epsilon(1e-6));
    CHECK(k4_ratio(1e-4, 1.0) == Catch::Approx(1e-4 / -std::expm1(-1e-4)).epsilon(1e-12));
}

TEST_CASE("H_T examples") {
    const auto r = bound_H_T(kEx, kUnit, 2, 1);
    CHECK(r.value == Catch::Approx(2.0 / (1.0 - std::exp(-1.0)) + 1.5).epsilon(1e-9));
    CHECK(r.s_star == Catch::Approx(1.0));
    CHECK(r.value == Catch::Approx(4.6639).epsilon(1e-4));
    CHECK(bound_H_T({1, 0, 1, -1}, kUnit, 2, 1).value == Catch::Approx(2.6640).epsilon(1e-4));
    CHECK(bound_H_T(kEx, {0, 0}, 2, 1).value == 0.0);
    CHECK_THROWS_AS(bound_H_T(kEx, kUnit, 1, 1), HorizonTooShort);
}

TEST_CASE("H_T matches a dense grid and is monotone") {
    const AssumptionConstants k{0.5, 0.3, 2.0, -0.7};
    for (double T : {1.5, 2.0, 4.0}) {
        const double oracle = dense_min([&](double s) { return h_t_at(k, {0.8, 1.2}, 1, s); }, 1e-6, T - 1, 200000);
        CHECK(bound_H_T(k, {0.8, 1.2}, T, 1).value == Catch::Approx(oracle).epsilon(1e-6));
    }
    CHECK(bound_H_T(k, {0.8, 1.2}, 3, 1).value <= bound_H_T(k, {0.8, 1.2}, 2, 1).value);
    CHECK(bound_H_T(k, {0.9, 1.2}, 2, 1).value >= bound_H_T(k, {0.8, 1.2}, 2, 1).value);
    CHECK(bound_H_T(k, {0.8, 1.3}, 2, 1).value >= bound_H_T(k, {0.8, 1.2}, 2, 1).value);
    const double coarse = bound_H_T(k, {0.8, 1.2}, 2, 1, 200).value;
    const double fine = bound_H_T(k, {0.8, 1.2}, 2, 1, 400).value;
    CHECK(std::abs(coarse - fine) < 1e-4 * fine);
}

TEST_CASE("entropy bound") {
    CHECK(bound_entropy_coupling(kEx, 1.0, 1.0, 1.0, kUnit) ==
          Catch::Approx(2.0 / (1.0 - std::exp(-1.0)) + 1.0).epsilon(1e-12));
    CHECK(bound_entropy_coupling(kEx, 1.0, 1.0, 1.0, {0, 0}) == 0.0);
    const double at1 = bound_entropy_coupling(kEx, 1.0, 0.5, 1.0, kUnit);
    CHECK(at1 <= bound_entropy_coupling(kEx, 0.5, 0.5, 1.0, kUnit));
    CHECK(at1 <= bound_entropy_coupling(kEx, 1.5, 0.5, 1.0, kUnit));
    CHECK_THROWS_AS(bound_entropy_coupling(kEx, 1.0, 1.5, 1.0, kUnit), InvalidArgument);
}

TEST_CASE("power Harnack ingredients") {
    CHECK(lambda_p(4) == 0.5);
    CHECK(lambda_p(9) == 0.125);
    CHECK(lambda_p(1e12) < 1e-11);
    const AssumptionConstants half{1, 0.5, 1, 0};
    CHECK(theta_set_contains(0.5, 4, {1, 0, 1, 0}));
    CHECK(theta_set_contains(0.01, 4, half));
    CHECK_FALSE(theta_set_contains(0.999, 4, half));
    const double sup = theta_set_sup(4, half);
    CHECK(theta_set_contains(sup, 4, half));
    CHECK_FALSE(theta_set_contains(std::min(sup + 1e-9, 0.999999), 4, half));
    const AssumptionConstants k{1, 0.1, 1, 0};
    CHECK(w_eps(0.5, 0.5, k, 1) == Catch::Approx(9.0));
    CHECK(s_eps(0.5, 0.5, k, 1) == Catch::Approx((std::sqrt(19.0) - 1.0) / 3.6).epsilon(1e-12));
    CHECK(std::isinf(s_eps(0.5, 0.5, {1, 0, 1, 0}, 1)));
    CHECK_THROWS_AS(require_power_range(9, {0, 0.2, 10, 0}), InvalidArgument);
    CHECK_NOTHROW(require_power_range(9.0001, {0, 0.2, 10, 0}));
}

TEST_CASE("Phi_p on a worked regime") {
    const AssumptionConstants k{1, 0.1, 1, 1};
    const auto r = bound_Phi_p(9, 2, k, kUnit, 1);
    REQUIRE(r.eps_star.has_value());
    CHECK(r.value > 0.0);
    CHECK(std::isfinite(r.value));
    // Admissibility of the reported minimizer.
    CHECK(r.s_star <= s_eps(*r.eps_star, lambda_p(9), k, 1) * (1 + 1e-12));
    CHECK(1.0 - 4.0 * k.k1 * k.k2 * r.s_star > 0.0);
    CHECK(theta_set_contains(*r.eps_star, 9, k));
    // Dense 2-d grid, ten times finer than the default, in linear spacing.
    const double emax = theta_set_sup(9, k);
    double oracle = std::numeric_limits<double>::infinity();
    for (int i = 1; i <= 2000; ++i) {
        const double eps = emax * i / 2000.0;
        const double smax = phi_p_s_max(9, k, 1, 2, eps);
        oracle = std::min(oracle, dense_min([&](double s) { return phi_p_terms(9, k, kUnit, 1, eps, s).sum(); },
                                            smax * 1e-4, smax, 2000));
    }
    oracle *= phi_p_prefactor(9);
    CHECK(r.value <= oracle * (1 + 1e-6));
    CHECK(r.value == Catch::Approx(oracle).epsilon(1e-3));
    const auto fine = bound_Phi_p(9, 2, k, kUnit, 1, 400, 400);
    CHECK(std::abs(fine.value - r.value) < 1e-4 * r.value);
}

TEST_CASE("Phi_p decreases in p") {
    const AssumptionConstants k{1, 0.1, 1, 1};
    const double a = bound_Phi_p(4, 2, k, kUnit, 1).value;
    const double b = bound_Phi_p(9, 2, k, kUnit, 1).value;
    const double c = bound_Phi_p(16, 2, k, kUnit, 1).value;
    CHECK(a >= b);
    CHECK(b >= c);
}

TEST_CASE("Phi_p with zero gaps has an open infimum") {
    const auto r = bound_Phi_p(4, 2, {1, 0, 1, 1}, {0, 0}, 1);
    CHECK(r.open_infimum);
    CHECK(r.value < 1e-3);
    CHECK(r.value >= 0.0);
}

TEST_CASE("lemma right-hand sides") {
    LemmaParams prm;
    prm.constants = {1, 0.1, 1, 0};
    prm.s = 0.5;
    prm.gaps = {0, 0};
    prm.lambda = 3.0;
    CHECK(lemma_rhs(Lemma::integrated_segment_gap, prm).prefactor ==
          Catch::Approx(std::exp(16 * 0.01 * 0.25 * 3.0 / 0.8)));
    const double cap = integrated_gap_lambda_cap(prm.constants, 0.5);
    CHECK(cap == Catch::Approx(40.0));
    prm.lambda = cap;
    prm.gaps = {0.3, 0.3};
    CHECK(lemma_rhs(Lemma::integrated_segment_gap, prm).prefactor ==
          Catch::Approx(std::exp(2.0 + 40.0 * 0.09)).epsilon(1e-12));
    prm.lambda = cap * 1.01;
    CHECK_THROWS_AS(lemma_rhs(Lemma::integrated_segment_gap, prm), InvalidArgument);
    prm.lambda = 0.0;
    const auto r = lemma_rhs(Lemma::terminal_segment_gap, prm);
    CHECK(r.prefactor == Catch::Approx(std::exp(1.0)));
    CHECK(r.inner_multiplier == 0.0);
    for (auto id : {Lemma::weighted_point_gap, Lemma::terminal_segment_gap, Lemma::integrated_segment_gap})
        CHECK(parse_lemma(to_string(id)) == id);
    CHECK_THROWS_AS(parse_lemma("lemma9"), InvalidArgument);
}
