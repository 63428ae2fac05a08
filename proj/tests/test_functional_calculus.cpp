#include "doctest.h"

#include <cmath>
#include <vector>

#include "weakpathlab/errors.hpp"
#include "weakpathlab/functional_calculus.hpp"
#include "weakpathlab/schemes.hpp"

using namespace wpl;

namespace {

// Prefix on the first k+1 nodes of g.
DiscretePath head_path(const GridPtr& g, std::vector<double> v, Interpolation mode = Interpolation::Linear) {
    auto pg = std::make_shared<const TimeGrid>(g->prefix(v.size()));
    return DiscretePath(pg, Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())), mode);
}

// Fine Euler path of `model` on g, cut after node k.
DiscretePath euler_head(const SdeModel& model, const GridPtr& g, std::size_t k, SeedSpec seed) {
    std::vector<double> inc(g->steps()), x(g->size());
    sample_increments(*g, seed, inc);
    euler_continue(model, *g, inc, 0, model.xi0, x);
    x.resize(k + 1);
    return head_path(g, x);
}

}  // namespace

TEST_CASE("estimate_F at the horizon is deterministic") {
    auto g = make_uniform_grid_ptr(1.0, 32);
    const auto s = make_nested_setup(ou_model(1.0, 1.0, 1.0), point_functional(1.0, 1.0), g);
    std::vector<double> v(33);
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = std::sin(3.0 * g->node(k));
    const auto p = head_path(g, v);
    const auto e = estimate_F(s, p, 50, {1, 0});
    CHECK(e.std_error == 0.0);
    std::vector<double> m(33);
    s.mollifier->apply(v, m);
    CHECK(e.value == doctest::Approx(m.back()).epsilon(1e-15));
    CHECK(e.epsilon == doctest::Approx(2.0 / 32));
    CHECK(e.fine_steps == 32);
}

TEST_CASE("estimate_F matches the mollified Euler mean for OU") {
    const double theta = 1.0, xi0 = 1.0;
    auto g = make_uniform_grid_ptr(1.0, 64);
    const auto s = make_nested_setup(ou_model(theta, 1.0, xi0), point_functional(1.0, 1.0), g);
    const auto e = estimate_F(s, head_path(g, {xi0}), 20000, {7, 0});
    // E of the Euler path is (1 - theta dt)^k; the mollifier is linear.
    std::vector<double> mean(g->size()), m(g->size());
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] = xi0 * std::pow(1.0 - theta / 64.0, static_cast<double>(k));
    s.mollifier->apply(mean, m);
    CHECK(e.std_error > 0.0);
    CHECK(std::abs(e.value - m.back()) <= 4.0 * e.std_error);
    // Euler and mollifier bias together stay below 2e-2 here.
    CHECK(std::abs(e.value - xi0 * std::exp(-theta)) <= 4.0 * e.std_error + 2e-2);
}

TEST_CASE("estimate_F under frozen dynamics is the constant extension") {
    auto g = make_uniform_grid_ptr(1.0, 32);
    const auto f = integral_functional(smooth_square());
    const auto s = make_nested_setup(constant_model(0.0, 0.0, 0.3), f, g);
    const std::vector<double> v{0.3, 0.5, -0.2, 0.8, 1.1};
    const auto e = estimate_F(s, head_path(g, v), 10, {3, 0});
    std::vector<double> ext(g->size(), v.back());
    std::copy(v.begin(), v.end(), ext.begin());
    std::vector<double> m(g->size());
    s.mollifier->apply(ext, m);
    CHECK(e.value == f.eval(PathView{g.get(), m, Interpolation::Linear}));
    CHECK(e.std_error == 0.0);
}

TEST_CASE("estimates are bit-identical across thread counts") {
    auto g = make_uniform_grid_ptr(1.0, 16);
    const auto s = make_nested_setup(sine_model(0.5, 1.0, 0.2), smooth_max_functional(2.0), g);
    const auto p = head_path(g, {0.2, 0.25, 0.1});
    const auto a = estimate_F(s, p, 3000, {11, 4}, Executor{1});
    const auto b = estimate_F(s, p, 3000, {11, 4}, Executor{3});
    CHECK(a.value == b.value);
    CHECK(a.std_error == b.std_error);
}

TEST_CASE("vertical derivative for OU point functional") {
    auto g = make_uniform_grid_ptr(1.0, 64);
    const auto model = ou_model(1.0, 1.0, 0.5);
    const auto s = make_nested_setup(model, point_functional(1.0, 1.0), g);
    const auto p = euler_head(model, g, 32, {5, 1});
    const auto d = vertical_derivative(s, p, 500, 0.0, {5, 2});
    CHECK(d.bump.value == doctest::Approx(std::exp(-0.5)).epsilon(1e-2));
    CHECK(d.agree);
    CHECK(std::abs(d.bump.value - d.pathwise.value) < 1e-9);
    CHECK(d.h == doctest::Approx(default_bump(p.value(32))));
}

TEST_CASE("vertical derivative agreement on the sine model") {
    auto g = make_uniform_grid_ptr(1.0, 32);
    const auto model = sine_model(0.5, 1.0, 0.0);
    const auto s = make_nested_setup(model, integral_functional(smooth_sine()), g);
    const auto p = euler_head(model, g, 8, {9, 1});
    const auto d = vertical_derivative(s, p, 4000, 0.0, {9, 2});
    CHECK(d.agree);
    CHECK(d.bump.std_error > 0.0);
}

TEST_CASE("vertical derivative limit cases") {
    auto g = make_uniform_grid_ptr(1.0, 64);
    const auto model = ou_model(1.0, 1.0, 0.5);
    const auto p = euler_head(model, g, 32, {2, 1});

    const auto past = make_nested_setup(model, product_functional(0.1, 0.2, 1.0), g);
    const auto d0 = vertical_derivative(past, p, 200, 0.0, {2, 2});
    CHECK(d0.bump.value == 0.0);
    CHECK(d0.pathwise.value == 0.0);

    const auto frozen = make_nested_setup(constant_model(0.0, 0.0, 0.5), point_functional(1.0, 1.0), g);
    const auto d1 = vertical_derivative(frozen, p, 20, 0.0, {2, 3});
    CHECK(d1.bump.value == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(d1.pathwise.value == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("second vertical derivative") {
    auto g = make_uniform_grid_ptr(1.0, 64);
    const auto model = ou_model(1.0, 1.0, 0.5);
    const auto p = euler_head(model, g, 16, {4, 1});

    const auto lin = make_nested_setup(model, point_functional(1.0, 1.0), g);
    const auto a = second_vertical_derivative(lin, p, 500, 0.0, {4, 2});
    CHECK(std::abs(a.value) <= 4.0 * a.std_error + 1e-8);

    const auto sq = make_nested_setup(constant_model(0.0, 0.0, 0.5), product_functional(1.0, 1.0, 1.0), g);
    const auto b = second_vertical_derivative(sq, p, 20, 0.0, {4, 3});
    CHECK(b.value == doctest::Approx(2.0).epsilon(1e-6));
    const auto c = second_vertical_derivative(sq, p, 20, 0.05, {4, 3});
    CHECK(c.value == doctest::Approx(2.0).epsilon(1e-8));
}

TEST_CASE("horizontal derivative") {
    auto g = make_uniform_grid_ptr(1.0, 32);
    const auto frozen = make_nested_setup(constant_model(0.0, 0.0, 0.5), point_functional(1.0, 1.0), g);
    const auto p = euler_head(ou_model(1.0, 1.0, 0.5), g, 16, {6, 1});
    const double h = 1.0 / 32;
    CHECK(horizontal_derivative(frozen, p, 50, h, {6, 2}).value == 0.0);

    const auto last = euler_head(ou_model(1.0, 1.0, 0.5), g, 31, {6, 1});
    CHECK_NOTHROW(horizontal_derivative(frozen, last, 5, h, {6, 2}));
    CHECK_THROWS_AS(horizontal_derivative(frozen, last, 5, 2 * h, {6, 2}), std::invalid_argument);
    CHECK_THROWS_AS(horizontal_derivative(frozen, p, 5, 0.0, {6, 2}), std::invalid_argument);
    CHECK_THROWS_AS(horizontal_derivative(frozen, p, 5, 0.3 * h, {6, 2}), std::invalid_argument);
}

TEST_CASE("Kolmogorov residual") {
    auto g = make_uniform_grid_ptr(1.0, 64);
    const auto model = ou_model(1.0, 1.0, 0.5);
    const auto p = euler_head(model, g, 16, {8, 1});

    const auto lin = make_nested_setup(model, point_functional(1.0, 1.0), g);
    const auto r = kolmogorov_residual(lin, p, 2000, 1, {8, 2});
    CHECK(r.passed);
    CHECK(r.passed == (std::abs(r.residual) <= r.tolerance));
    CHECK(r.components.count("horizontal") == 1);

    const auto frozen = make_nested_setup(constant_model(0.0, 0.0, 0.5), integral_functional(smooth_cube()), g);
    const auto z = kolmogorov_residual(frozen, p, 20, 1, {8, 3});
    CHECK(z.residual == 0.0);
    CHECK(z.passed);

    const auto sq = make_nested_setup(model, product_functional(1.0, 1.0, 1.0), g);
    const auto ok = kolmogorov_residual(sq, p, 4000, 1, {8, 4});
    const auto bad = kolmogorov_residual(sq, p, 4000, 1, {8, 4}, KolmogorovFault::DropHalfFactor);
    CHECK(ok.passed);
    CHECK_FALSE(bad.passed);
    CHECK(std::abs(bad.residual) > 10.0 * bad.std_error);

    std::vector<double> off{0.7, 0.6};
    CHECK_THROWS_AS(kolmogorov_residual(lin, head_path(g, off), 5, 1, {8, 5}), std::invalid_argument);
    std::vector<double> step{0.5, 0.6};
    CHECK_THROWS_AS(kolmogorov_residual(lin, head_path(g, step, Interpolation::CadlagStep), 5, 1, {8, 5}),
                    std::invalid_argument);
}

TEST_CASE("martingale gap") {
    auto g = make_uniform_grid_ptr(1.0, 32);
    const auto model = ou_model(1.0, 1.0, 0.5);
    const auto s = make_nested_setup(model, point_functional(1.0, 1.0), g);
    const auto same = martingale_gap(s, 0.5, 0.5, 50, 20, {10, 0});
    CHECK(same.residual == 0.0);
    CHECK(same.passed);

    const auto r = martingale_gap(s, 0.25, 0.75, 400, 100, {10, 1});
    CHECK(r.passed);
    CHECK(r.std_error > 0.0);

    const auto prod = make_nested_setup(model, product_functional(0.5, 1.0, 1.0), g);
    CHECK(martingale_gap(prod, 0.125, 0.875, 400, 100, {10, 2}).passed);
    CHECK_THROWS_AS(martingale_gap(s, 0.75, 0.25, 10, 10, {10, 3}), std::invalid_argument);
}

TEST_CASE("Ito residual limit cases") {
    auto g = make_uniform_grid_ptr(1.0, 16);
    const std::vector<double> zeros(16, 0.0);
    const auto w0 = brownian_from_increments(g, zeros);
    CHECK(ito_residual(w0, QvMode::Realized).residual == 0.0);
    CHECK(ito_residual(w0, QvMode::Bracket).residual == -1.0);

    auto one = make_uniform_grid_ptr(1.0, 1);
    const auto w1 = sample_brownian(one, {12, 0});
    const auto r = ito_residual(w1, QvMode::Realized);
    CHECK(std::abs(r.residual) <= 1e-15 * (1.0 + w1.value(1) * w1.value(1)));
    CHECK(r.passed);

    const auto w = sample_brownian(make_uniform_grid_ptr(1.0, 256), {12, 1});
    CHECK(ito_residual(w, QvMode::Realized).passed);
    CHECK(ito_residual(w, QvMode::Bracket).passed);
}

TEST_CASE("Ito residual shrinks like the square root of the mesh") {
    const auto c = ito_check(1.0, 8, 4, 10000, {13, 0});
    REQUIRE(c.ratio.size() == 4);
    for (double r : c.ratio) {
        CHECK(r >= 1.2);
        CHECK(r <= 1.7);
    }
    CHECK(c.passed);
    // Bracket residual is sum (dW^2 - dt): rms sqrt(2 T dt).
    CHECK(c.rms[0] == doctest::Approx(std::sqrt(2.0 / 8)).epsilon(0.05));
}

TEST_CASE("error representation guards and degenerate case") {
    const auto model = ou_model(1.0, 1.0, 0.5);
    const auto f = point_functional(0.25, 0.25);
    ErrorRepresentationSpec spec;
    spec.n_outer = 1000;
    spec.n_inner = 1000;
    spec.budget_cap = 1e6;
    CHECK_THROWS_AS(error_representation_sides(model, f, spec), BudgetExceeded);

    ErrorRepresentationSpec big;
    big.horizon = 1.0;
    CHECK_THROWS_AS(error_representation_sides(model, point_functional(1.0, 1.0), big), std::invalid_argument);
    ErrorRepresentationSpec many;
    many.coarse_steps = 5;
    CHECK_THROWS_AS(error_representation_sides(model, f, many), std::invalid_argument);
    ErrorRepresentationSpec odd;
    odd.refinement = 12;
    odd.quadrature_per_step = 5;
    CHECK_THROWS_AS(error_representation_sides(model, f, odd), std::invalid_argument);

    ErrorRepresentationSpec same;
    same.refinement = 1;
    same.epsilon = 0.25;
    same.n_outer = 200;
    same.n_inner = 10;
    const auto r = error_representation_sides(model, f, same);
    CHECK(r.lhs.value == 0.0);
    CHECK(r.rhs.value == 0.0);
    CHECK(r.passed);
}

TEST_CASE("error representation sides agree on OU") {
    const auto model = ou_model(1.0, 1.0, 0.5);
    ErrorRepresentationSpec spec;
    spec.refinement = 16;
    spec.n_outer = 600;
    spec.n_inner = 10;
    spec.seed = {14, 0};
    const auto r = error_representation_sides(model, point_functional(0.25, 0.25), spec);
    CHECK(r.passed);
    CHECK(r.lhs.std_error > 0.0);
    CHECK(std::abs(r.difference) < 1e-14);

    // Sub-sampled quadrature still agrees at this size.
    spec.quadrature_per_step = 4;
    CHECK(error_representation_sides(model, point_functional(0.25, 0.25), spec).passed);
    CHECK(r.projected_continuations == doctest::Approx(600.0 * 2 * 16 * 10 * 2));
}
