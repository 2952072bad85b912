#include "helpers.hpp"

using namespace harnack;
using namespace harnack::test;

TEST_CASE("catalog constants") {
    const auto lin = builtin_system<1>("linear_additive", linear_params(-1, 0.5, 1));
    CHECK(lin.constants == AssumptionConstants{0.5, 0.0, 1.0, -2.0});
    const auto bm = builtin_system<1>("linear_additive", linear_params(0, 0, 1));
    CHECK(bm.constants == AssumptionConstants{0.0, 0.0, 1.0, 0.0});
    const auto sine = builtin_system<1>("sine_multiplicative", linear_params(-1, 0.2, 0.1));
    CHECK(sine.constants.k2 == Catch::Approx(0.2));
    CHECK(sine.constants.k3 == Catch::Approx(10.0));
    CHECK(sine.constants.k4 == Catch::Approx(-1.99));
}

TEST_CASE("catalog rejects bad names and parameters") {
    CHECK_THROWS_AS(builtin_system<1>("no_such_system", {}), InvalidArgument);
    CHECK_THROWS_AS(builtin_system<1>("linear_additive", {{"a", -1}, {"c", 0.5}}), InvalidArgument);
    CHECK_THROWS_AS(builtin_system<1>("linear_additive", {{"a", -1}, {"c", 0.5}, {"s0", 1}, {"q", 2}}),
                    InvalidArgument);
    CHECK_THROWS_AS(builtin_system<1>("linear_additive", linear_params(-1, 0.5, 0)), InvalidArgument);
}

TEST_CASE("plugin systems can be registered") {
    register_system<1>("plugin_ou", {{"a"}, [](const SystemParams& p, int) {
                                         auto c = scalar_system([a = p.at("a")](double x) { return -a * x; },
                                                                [](const SegmentPath<1>&) { return 0.0; }, 1.0);
                                         c.name = "plugin_ou";
                                         return c;
                                     }});
    const auto c = builtin_system<1>("plugin_ou", {{"a", 2.0}});
    CHECK(c.z_drift(0, v1(1.0))(0) == -2.0);
}

TEST_CASE("audit of the linear system") {
    const auto lin = builtin_system<1>("linear_additive", linear_params(-1, 0.5, 1));
    const auto rep = audit_assumptions<1>(lin, {}, 10000, 11);
    CHECK(rep.all_pass());
    REQUIRE(rep.conditions.size() == 4);
    CHECK(rep.conditions[1].empirical_max == 0.0); // constant sigma
    CHECK(rep.conditions[3].empirical_max == Catch::Approx(-2.0).epsilon(1e-10));
    const auto again = audit_assumptions<1>(lin, {}, 10000, 11);
    for (int i = 0; i < 4; ++i) CHECK(again.conditions[i].empirical_max == rep.conditions[i].empirical_max);
}

TEST_CASE("builtin systems pass their own audit") {
    for (const auto& [name, params] : std::vector<std::pair<std::string, SystemParams>>{
             {"linear_additive", linear_params(-1, 0.5, 1)},
             {"sine_multiplicative", linear_params(-1, 0.2, 0.1)},
             {"ou_nodelay", {{"a", 1}, {"s0", 1}}}}) {
        const auto c = builtin_system<1>(name, params);
        CHECK(audit_assumptions<1>(c, {}, 100000, 3).all_pass());
    }
    const auto lin2 = builtin_system<Eigen::Dynamic>("linear_additive", linear_params(-1, 0.5, 1), 3);
    CHECK(audit_assumptions<Eigen::Dynamic>(lin2, {}, 20000, 3).all_pass());
}

TEST_CASE("audit catches an understated K2") {
    auto sine = builtin_system<1>("sine_multiplicative", linear_params(-1, 0.2, 0.1));
    sine.constants.k2 /= 2.0;
    const auto rep = audit_assumptions<1>(sine, {}, 20000, 5);
    CHECK_FALSE(rep.conditions[1].pass);
    CHECK(rep.conditions[0].pass);
}

TEST_CASE("audit reports a singular sigma") {
    auto lin = builtin_system<1>("linear_additive", linear_params(-1, 0.5, 1));
    lin = scale_noise(lin, 0.0);
    const auto rep = audit_assumptions<1>(lin, {}, 100, 5);
    CHECK_FALSE(rep.all_pass());
    CHECK_FALSE(rep.conditions[2].pass);
}
