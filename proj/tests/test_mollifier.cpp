#include "doctest.h"

#include <cmath>
#include <vector>

#include "weakpathlab/errors.hpp"
#include "weakpathlab/mollifier.hpp"
#include "weakpathlab/random.hpp"

using namespace wpl;

namespace {

DiscretePath random_path(const GridPtr& g, std::uint64_t id, Interpolation mode) {
    StreamEngine e(SeedSpec{99, id});
    Eigen::VectorXd v(static_cast<Eigen::Index>(g->size()));
    double x = 3.0 * (e.uniform_open() - 0.5);
    for (Eigen::Index k = 0; k < v.size(); ++k) {
        x += 0.3 * standard_normal(e);
        v[k] = x;
    }
    return DiscretePath(g, v, mode);
}

}  // namespace

TEST_CASE("kernel weights") {
    const MollifierSpec spec{0.1, 32};
    const auto w = kernel_weights(spec, 0.01);
    REQUIRE(w.size() == 32);
    CHECK(std::abs(w.sum() - 1.0) < 1e-15);
    CHECK((w.array() >= 0.0).all());
    for (Eigen::Index j = 0; j < 16; ++j) CHECK(w[j] == w[31 - j]);
    const auto u = kernel_offsets(spec);
    CHECK(u.minCoeff() > 0.0);
    CHECK(u.maxCoeff() < 0.1);
    CHECK((w.array() * u.array()).sum() == doctest::Approx(0.05).epsilon(1e-14));

    CHECK_THROWS_AS(kernel_weights(MollifierSpec{0.1, 1}, 0.01), ResolutionTooCoarse);
    CHECK_THROWS_AS(kernel_weights(MollifierSpec{0.1, 32}, 0.06), ResolutionTooCoarse);
    CHECK_NOTHROW(kernel_weights(MollifierSpec{0.1, 32}, 0.05));
    CHECK_THROWS_AS(kernel_weights(MollifierSpec{0.0, 32}, 0.01), std::invalid_argument);
    CHECK_THROWS_AS(kernel_weights(MollifierSpec{0.1, 32}, 0.0), std::invalid_argument);
}

TEST_CASE("mollify constants and ramps") {
    auto g = make_uniform_grid_ptr(1.0, 1000);
    const DiscretePath c(g, Eigen::VectorXd::Constant(1001, 2.5), Interpolation::Linear);
    const auto mc = mollify({0.1, 32}, c);
    CHECK(mc.mode() == Interpolation::Linear);
    for (std::size_t k = 0; k < g->size(); ++k) CHECK(std::abs(mc.value(k) - 2.5) < 1e-14);

    const DiscretePath ramp(g, g->nodes(), Interpolation::Linear);
    const auto mr = mollify({0.1, 32}, ramp);
    for (std::size_t k = 100; k < g->size(); ++k) CHECK(std::abs(mr.value(k) - (g->node(k) - 0.05)) < 1e-6);
    // Before eps the constant extension x(0) = 0 enters.
    CHECK(mr.value(0) == 0.0);
    CHECK(mr.value(50) > 0.0);

    CHECK_THROWS_AS(mollify({-0.1, 32}, ramp), std::invalid_argument);
    CHECK_THROWS_AS(mollify({0.0, 32}, ramp), std::invalid_argument);
}

TEST_CASE("mollifier contraction, linearity and causality") {
    auto g = make_uniform_grid_ptr(1.0, 128);
    const MollifierSpec spec{4.0 / 128.0, 32};
    for (auto mode : {Interpolation::Linear, Interpolation::CadlagStep}) {
        const MollifierOperator op(spec, g, mode);
        for (std::uint64_t i = 0; i < 50; ++i) {
            const auto x = random_path(g, i, mode);
            const auto y = random_path(g, i + 1000, mode);
            const auto mx = op.apply(x);
            CHECK(sup_norm(mx) <= sup_norm(x) * (1.0 + 1e-15));

            const double a = 1.7, b = -0.3;
            const DiscretePath comb(g, Eigen::MatrixXd(a * x.values() + b * y.values()), mode);
            const auto lhs = op.apply(comb);
            const Eigen::MatrixXd rhs = a * mx.values() + b * op.apply(y).values();
            CHECK((lhs.values() - rhs).cwiseAbs().maxCoeff() < 1e-10);

            Eigen::MatrixXd edited = x.values();
            const Eigen::Index cut = 40;
            edited.bottomRows(edited.rows() - cut - 1).array() += 5.0;
            const auto me = op.apply(DiscretePath(g, edited, mode));
            for (Eigen::Index k = 0; k <= cut; ++k) CHECK(me.values()(k, 0) == mx.values()(k, 0));
        }
    }
}

TEST_CASE("mollified paths converge for Lipschitz inputs") {
    auto g = make_uniform_grid_ptr(1.0, 4096);
    const DiscretePath ramp(g, g->nodes(), Interpolation::Linear);
    double prev = 1.0;
    for (double eps : {0.1, 0.05, 0.01}) {
        const auto m = mollify({eps, 32}, ramp);
        const double err = (m.values() - ramp.values()).cwiseAbs().maxCoeff();
        CHECK(err <= eps * (1.0 + 1e-9));
        CHECK(err < prev);
        prev = err;
    }
}

TEST_CASE("operator guards") {
    auto g = make_uniform_grid_ptr(1.0, 16);
    const MollifierOperator op({0.125, 32}, g, Interpolation::Linear);
    auto other = make_uniform_grid_ptr(1.0, 32);
    const DiscretePath p(other, Eigen::VectorXd::Zero(33), Interpolation::Linear);
    CHECK_THROWS_AS(op.apply(p), std::invalid_argument);
    const DiscretePath q(g, Eigen::VectorXd::Zero(17), Interpolation::CadlagStep);
    CHECK_THROWS_AS(op.apply(q), std::invalid_argument);
    const DiscretePath r(g, Eigen::VectorXd::LinSpaced(17, 0.0, 1.0), Interpolation::Linear);
    const auto mr = op.apply(r);
    std::vector<double> v(r.values().data(), r.values().data() + 17);
    for (std::size_t k = 0; k < 17; ++k) CHECK(op.apply_row(k, v) == doctest::Approx(mr.value(k)).epsilon(1e-15));
}
