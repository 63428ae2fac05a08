#include "doctest.h"

#include "weakpathlab/audits.hpp"

using namespace wpl;

TEST_CASE("mollifier audit passes on a small sample") {
    const auto checks = mollifier_audit(50, {3, 0});
    REQUIRE(checks.size() == 4);
    for (const auto& c : checks) {
        INFO(c.name << " = " << c.value);
        CHECK(c.passed);
        CHECK(c.value <= c.tolerance);
    }
}

TEST_CASE("haar round trip reports one check per level") {
    const auto checks = haar_round_trip(5, 10, {4, 0});
    REQUIRE(checks.size() == 6);
    for (const auto& c : checks) {
        INFO(c.name << " = " << c.value);
        CHECK(c.passed);
        CHECK(c.value < 1e-12);
    }
}

TEST_CASE("audits are deterministic in the seed") {
    const auto a = haar_round_trip(4, 5, {9, 1});
    const auto b = haar_round_trip(4, 5, {9, 1});
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].value == b[i].value);
}
