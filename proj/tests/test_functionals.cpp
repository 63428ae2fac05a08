#include "doctest.h"

#include <cmath>
#include <vector>

#include "weakpathlab/errors.hpp"
#include "weakpathlab/functionals.hpp"
#include "weakpathlab/random.hpp"

using namespace wpl;

namespace {

DiscretePath random_path(const GridPtr& g, std::uint64_t id, double scale = 1.0) {
    StreamEngine e(SeedSpec{123, id});
    Eigen::VectorXd v(static_cast<Eigen::Index>(g->size()));
    double x = scale * (e.uniform_open() - 0.5);
    for (Eigen::Index k = 0; k < v.size(); ++k) {
        x += scale * 0.25 * standard_normal(e);
        v[k] = x;
    }
    return DiscretePath(g, v, Interpolation::Linear);
}

DiscretePath shifted(const DiscretePath& x, const DiscretePath& h, double tau) {
    return DiscretePath(x.grid_ptr(), Eigen::MatrixXd(x.values() + tau * h.values()), x.mode());
}

std::vector<PathFunctional> shipped() {
    return {point_functional(0.7, 1.0),          point_functional(0.55, 1.0),
            product_functional(0.3, 1.0, 1.0),   product_functional(0.5, 0.5, 1.0),
            integral_functional(smooth_square()), integral_functional(smooth_cube()),
            integral_functional(smooth_sine()),   integral_functional(smooth_identity()),
            smooth_max_functional(1.0),          smooth_max_functional(5.0)};
}

void audit_derivatives(const PathFunctional& f, const GridPtr& g) {
    for (std::uint64_t i = 0; i < 100; ++i) {
        const auto x = random_path(g, i);
        const auto h = random_path(g, 1000 + i);
        const auto h2 = random_path(g, 2000 + i);
        const double tau = 1e-4 * (1.0 + sup_norm(h));
        const double d1 = f.derivative(x, h);
        const double fd1 = (f(shifted(x, h, tau)) - f(shifted(x, h, -tau))) / (2.0 * tau);
        CHECK(std::abs(d1 - fd1) <= 1e-4 * (1.0 + std::abs(d1)));

        const double d2 = f.second_derivative(x, h, h);
        const double fd2 = (f(shifted(x, h, tau)) - 2.0 * f(x) + f(shifted(x, h, -tau))) / (tau * tau);
        CHECK(std::abs(d2 - fd2) <= 1e-4 * (1.0 + std::abs(d2)) + 1e-5);

        CHECK(f.second_derivative(x, h, h2) == doctest::Approx(f.second_derivative(x, h2, h)).epsilon(1e-12));
    }
}

}  // namespace

TEST_CASE("point functional") {
    auto g = make_uniform_grid_ptr(1.0, 10);
    const DiscretePath ramp(g, g->nodes(), Interpolation::Linear);
    const auto f = point_functional(0.7, 1.0);
    CHECK(f(ramp) == doctest::Approx(0.7));
    const auto h = random_path(g, 1);
    CHECK(f.derivative(ramp, h) == f.derivative(random_path(g, 2), h));
    CHECK(f.second_derivative(ramp, h, h) == 0.0);
    CHECK_THROWS_AS(point_functional(1.5, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(point_functional(-0.1, 1.0), std::invalid_argument);
}

TEST_CASE("product functional") {
    auto g = make_uniform_grid_ptr(1.0, 10);
    const auto f = product_functional(0.35, 0.8, 1.0);
    const DiscretePath zero(g, Eigen::VectorXd::Zero(11), Interpolation::Linear);
    CHECK(f(zero) == 0.0);
    const auto x = random_path(g, 3);
    CHECK(f.derivative(x, x) == doctest::Approx(2.0 * f(x)));
    const auto h1 = random_path(g, 4), h2 = random_path(g, 5);
    CHECK(f.second_derivative(x, h1, h2) == doctest::Approx(f.second_derivative(x, h2, h1)));
    CHECK_THROWS_AS(product_functional(0.2, 1.2, 1.0), std::invalid_argument);
}

TEST_CASE("integral functional") {
    auto g = make_uniform_grid_ptr(1.0, 1000);
    const DiscretePath c(g, Eigen::VectorXd::Constant(1001, 1.5), Interpolation::Linear);
    CHECK(integral_functional(smooth_identity())(c) == doctest::Approx(1.5).epsilon(1e-12));
    const DiscretePath ramp(g, g->nodes(), Interpolation::Linear);
    const auto sq = integral_functional(smooth_square());
    CHECK(std::abs(sq(ramp) - 1.0 / 3.0) < 1e-6);
    const DiscretePath one(g, Eigen::VectorXd::Ones(1001), Interpolation::Linear);
    CHECK(std::abs(sq.derivative(ramp, one) - 1.0) < 1e-6);

    // step paths integrate exactly as left sums
    auto g4 = make_uniform_grid_ptr(1.0, 4);
    const DiscretePath steps(g4, Eigen::VectorXd(Eigen::Matrix<double, 5, 1>(1, 2, 3, 4, 100)), Interpolation::CadlagStep);
    CHECK(integral_functional(smooth_identity())(steps) == doctest::Approx(2.5));
    CHECK_THROWS_AS(smooth_scalar_by_name("runmax"), UnknownName);
}

TEST_CASE("smooth max") {
    auto g = make_uniform_grid_ptr(1.0, 2000);
    const DiscretePath c(g, Eigen::VectorXd::Constant(2001, -0.75), Interpolation::Linear);
    CHECK(smooth_max_functional(3.0)(c) == -0.75);
    const DiscretePath ramp(g, g->nodes(), Interpolation::Linear);
    double prev = -1.0;
    for (double beta : {1.0, 10.0, 100.0}) {
        const double v = smooth_max_functional(beta)(ramp);
        CHECK(v < 1.0);
        CHECK(v > prev);
        // continuous value beta^-1 log((e^beta - 1) / beta)
        CHECK(v == doctest::Approx(std::log(std::expm1(beta) / beta) / beta).epsilon(1e-5));
        prev = v;
    }
    for (std::uint64_t i = 0; i < 50; ++i) {
        const auto x = random_path(g, i, 2.0);
        CHECK(smooth_max_functional(4.0)(x) <= sup_norm(x) + 1e-12);
    }
    const DiscretePath big(g, Eigen::VectorXd::Constant(2001, 8.0), Interpolation::Linear);
    CHECK_THROWS_AS(smooth_max_functional(100.0)(big), NumericalOverflow);
    CHECK_THROWS_AS(smooth_max_functional(0.0), std::invalid_argument);
}

TEST_CASE("derivative audit for every shipped functional") {
    auto g = make_uniform_grid_ptr(1.0, 20);
    for (const auto& f : shipped()) {
        CAPTURE(f.kind);
        audit_derivatives(f, g);
    }
}

TEST_CASE("growth audit") {
    auto g = make_uniform_grid_ptr(1.0, 20);
    for (const auto& f : shipped()) {
        CAPTURE(f.kind);
        for (std::uint64_t i = 0; i < 20; ++i) {
            const auto x = random_path(g, 500 + i);
            for (double lambda : {1.0, 2.0, 4.0, 8.0}) {
                const DiscretePath lx(g, Eigen::MatrixXd(lambda * x.values()), x.mode());
                const double bound = f.growth_constant * (1.0 + std::pow(sup_norm(lx), f.growth_exponent));
                CHECK(std::abs(f(lx)) <= bound * (1.0 + 1e-12));
            }
        }
    }
}

TEST_CASE("mollified functionals keep growth and derivative bounds") {
    auto g = make_uniform_grid_ptr(1.0, 64);
    auto op = std::make_shared<const MollifierOperator>(MollifierSpec{2.0 / 64.0, 32}, g, Interpolation::Linear);
    for (const auto& f : shipped()) {
        CAPTURE(f.kind);
        const auto fe = mollified(f, op);
        CHECK(fe.growth_exponent == f.growth_exponent);
        for (std::uint64_t i = 0; i < 20; ++i) {
            const auto x = random_path(g, 700 + i);
            CHECK(std::abs(fe(x)) <= f.growth_constant * (1.0 + std::pow(sup_norm(x), f.growth_exponent)) * (1 + 1e-12));
            const auto h = random_path(g, 900 + i);
            const double tau = 1e-4 * (1.0 + sup_norm(h));
            const double fd = (fe(shifted(x, h, tau)) - fe(shifted(x, h, -tau))) / (2.0 * tau);
            CHECK(std::abs(fe.derivative(x, h) - fd) <= 1e-4 * (1.0 + std::abs(fd)));
        }
    }
}
