#include "helpers.hpp"

using namespace harnack;
using namespace harnack::test;

namespace {
const auto zero_b = [](const SegmentPath<1>&) { return 0.0; };
}

TEST_CASE("single Euler steps") {
    const auto c = scalar_system([](double x) { return -x; }, zero_b, 1.0);
    CHECK(step_euler<1>(0, v1(1), flat(1, 4, 1), v1(0.2), 0.1, c)(0) == Catch::Approx(1.1));
    const auto still = scalar_system([](double) { return 0.0; }, zero_b, 1.0);
    CHECK(step_euler<1>(0, v1(3), flat(1, 4, 3), v1(0.0), 0.1, still)(0) == 3.0);
    const auto lin = builtin_system<1>("linear_additive", linear_params(-1, 0.5, 1));
    auto seg = flat(1, 100, 1);
    seg.set_newest(v1(2));
    CHECK(step_euler<1>(0, v1(2), seg, v1(0.0), 0.01, lin)(0) == Catch::Approx(1.985));
    CHECK_THROWS_AS(step_euler<1>(0, v1(1), seg, v1(0.0), 0.0, lin), InvalidArgument);
}

TEST_CASE("deterministic skeleton converges at first order") {
    const auto c = scale_noise(scalar_system([](double x) { return -x; }, zero_b, 1.0), 0.0);
    auto endpoint_error = [&](int m) {
        const auto tr = simulate_path<1>(c, flat(1, m, 1), GridSpec(1, 1, m), 1, 0);
        return std::abs(tr.points.back()(0) - std::exp(-1.0));
    };
    CHECK(endpoint_error(1000) < 1e-3);
    const double ratio = endpoint_error(500) / endpoint_error(1000);
    CHECK(ratio == Catch::Approx(2.0).epsilon(0.2));
}

TEST_CASE("no dynamics means a constant path") {
    const auto c = scale_noise(scalar_system([](double) { return 0.0; }, zero_b, 1.0), 0.0);
    const auto tr = simulate_path<1>(c, flat(1, 10, 0.3), GridSpec(1, 3, 10), 1, 0);
    for (const auto& x : tr.points) CHECK(x(0) == 0.3);
}

TEST_CASE("paths are reproducible from (seed, path)") {
    const auto lin = builtin_system<1>("linear_additive", linear_params(-1, 0.5, 1));
    const GridSpec g(1, 2, 50);
    const auto a = simulate_path<1>(lin, flat(1, 50, 1), g, 9, 4, true);
    const auto b = simulate_path<1>(lin, flat(1, 50, 1), g, 9, 4, true);
    const auto c = simulate_path<1>(lin, flat(1, 50, 1), g, 9, 5, true);
    CHECK(a.points == b.points);
    CHECK(*a.increments == *b.increments);
    CHECK(a.points != c.points);
    CHECK(a.terminal_segment()[50] == a.points.back());
    CHECK(a.segment_at(10)[0] == v1(1.0));
}

TEST_CASE("Brownian motion moments") {
    const auto bm = builtin_system<1>("linear_additive", linear_params(0, 0, 1));
    const GridSpec g(1, 1, 10);
    const long n = 100000;
    std::vector<double> x(n), x2(n);
    parallel_for(n, {}, [&](long i) {
        const auto seg = run_path<1>(bm, flat(1, 10, 0), g, 17, static_cast<std::uint64_t>(i),
                                     [](long, const Vector<1>&, const Vector<1>&) {});
        x[static_cast<std::size_t>(i)] = seg.newest()(0);
        x2[static_cast<std::size_t>(i)] = seg.newest()(0) * seg.newest()(0);
    });
    const auto m = MCEstimate::from_samples(x, 17);
    const auto v = MCEstimate::from_samples(x2, 17);
    CHECK(std::abs(m.mean) < 4 * m.std_error);
    CHECK(std::abs(v.mean - 1.0) < 5 * v.std_error);
}

TEST_CASE("blow-up is reported with its step") {
    const auto c = scale_noise(scalar_system([](double x) { return x * x; }, zero_b, 1.0), 0.0);
    try {
        simulate_path<1>(c, flat(1, 10, 1e3), GridSpec(1, 5, 10), 1, 0);
        FAIL("expected NonFiniteState");
    } catch (const NonFiniteState& e) {
        CHECK(e.step() > 0);
    }
}

TEST_CASE("grid mismatch is rejected") {
    const auto lin = builtin_system<1>("linear_additive", linear_params(-1, 0.5, 1));
    CHECK_THROWS_AS(simulate_path<1>(lin, flat(1, 20, 1), GridSpec(1, 2, 50), 1, 0), InvalidArgument);
}

TEST_CASE("two-dimensional systems run") {
    const auto lin = builtin_system<Eigen::Dynamic>("linear_additive", linear_params(-1, 0.5, 1), 2);
    Vector<Eigen::Dynamic> x0(2);
    x0 << 1, -1;
    const auto tr = simulate_path<Eigen::Dynamic>(lin, SegmentPath<Eigen::Dynamic>::constant(1, 20, x0),
                                                  GridSpec(1, 2, 20), 3, 0);
    CHECK(tr.points.size() == 41);
    CHECK(tr.points.back().size() == 2);
}
