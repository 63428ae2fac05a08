#include "doctest.h"

#include <cmath>
#include <vector>

#include "weakpathlab/errors.hpp"
#include "weakpathlab/schemes.hpp"
#include "weakpathlab/stats.hpp"

using namespace wpl;

TEST_CASE("euler limit cases") {
    auto g = make_uniform_grid_ptr(1.0, 8);
    const auto w = sample_brownian(g, {3, 1});

    const auto frozen = euler_nodes(constant_model(0.0, 0.0, 1.25), w);
    for (Eigen::Index n = 0; n < frozen.nodes.size(); ++n) CHECK(frozen.nodes[n] == 1.25);

    const auto drift = euler_nodes(constant_model(1.0, 0.0, 0.5), w);
    for (std::size_t n = 0; n < g->size(); ++n)
        CHECK(std::abs(drift.nodes[static_cast<Eigen::Index>(n)] - (0.5 + g->node(n))) < 1e-14);

    const auto noise = euler_nodes(constant_model(0.0, 1.0, 0.5), w);
    for (std::size_t n = 0; n < g->size(); ++n)
        CHECK(std::abs(noise.nodes[static_cast<Eigen::Index>(n)] - (0.5 + w.value(n))) < 1e-14);

    CHECK(noise.y_path.scalar_values() == noise.nodes);
}

TEST_CASE("euler overflow reports the step") {
    auto g = make_uniform_grid_ptr(1.0, 50);
    SdeModel m = constant_model(0.0, 0.0, 10.0);
    m.affine.reset();
    m.b = [](double x) { return x * x * x * 100.0; };
    const std::vector<double> zeros(50, 0.0);
    const auto w = brownian_from_increments(g, zeros);
    try {
        euler_nodes(m, w);
        FAIL("expected overflow");
    } catch (const NumericalOverflow& e) {
        CHECK(e.step() > 0);
        CHECK(e.step() <= 50);
    }
}

TEST_CASE("linear interpolation") {
    auto g = make_uniform_grid_ptr(1.0, 4);
    const auto w = sample_brownian(g, {2, 2});
    const auto s = euler_nodes(sine_model(0.5, 1.0, 0.3), w);
    const auto y = linear_interpolation(s);
    for (std::size_t n = 0; n < g->size(); ++n) CHECK(eval_path(y, g->node(n)) == s.nodes[static_cast<Eigen::Index>(n)]);
    for (std::size_t n = 0; n + 1 < g->size(); ++n) {
        const double mid = 0.5 * (g->node(n) + g->node(n + 1));
        const double avg = 0.5 * (s.nodes[static_cast<Eigen::Index>(n)] + s.nodes[static_cast<Eigen::Index>(n + 1)]);
        CHECK(eval_path(y, mid) == doctest::Approx(avg));
    }
    const auto c = euler_nodes(constant_model(0.0, 0.0, 2.0), w);
    CHECK(eval_path(linear_interpolation(c), 0.37) == 2.0);
}

TEST_CASE("stochastic interpolation") {
    auto coarse = make_uniform_grid_ptr(1.0, 4);
    auto fine = std::make_shared<const TimeGrid>(coarse->refine(16));
    const auto wf = sample_brownian(fine, {7, 7});
    Eigen::VectorXd ci(4);
    for (Eigen::Index n = 0; n < 4; ++n) ci[n] = wf.value(static_cast<std::size_t>(16 * (n + 1))) - wf.value(static_cast<std::size_t>(16 * n));
    const auto wc = brownian_from_increments(coarse, std::span<const double>(ci.data(), 4));

    const auto model = sine_model(0.5, 1.0, 0.2);
    const auto s = euler_nodes(model, wc);
    const auto xt = stochastic_interpolation(s, wf);
    for (std::size_t n = 0; n < coarse->size(); ++n) CHECK(xt.value(16 * n) == s.nodes[static_cast<Eigen::Index>(n)]);

    // sigma = 0: X~ is the drift-only linear interpolation
    const auto sd = euler_nodes(constant_model(0.7, 0.0, 0.0), wc);
    const auto xd = stochastic_interpolation(sd, wf);
    const auto yd = linear_interpolation(sd);
    for (std::size_t k = 0; k < fine->size(); ++k) CHECK(std::abs(xd.value(k) - eval_path(yd, fine->node(k))) < 1e-14);

    // pure noise: X~ - Y is the bridge of W on each interval
    const auto sn = euler_nodes(constant_model(0.0, 1.0, 0.0), wc);
    const auto xn = stochastic_interpolation(sn, wf);
    const auto yn = linear_interpolation(sn);
    for (std::size_t k = 0; k < fine->size(); ++k) {
        const double t = fine->node(k);
        const std::size_t n = std::min<std::size_t>(k / 16, 3);
        const double tn = coarse->node(n), tn1 = coarse->node(n + 1);
        const double bridge = (wf.value(k) - wf.value(16 * n)) -
                              (t - tn) / (tn1 - tn) * (wf.value(16 * (n + 1)) - wf.value(16 * n));
        CHECK(std::abs((xn.value(k) - eval_path(yn, t)) - bridge) < 1e-13);
    }

    auto other = make_uniform_grid_ptr(1.0, 6);
    CHECK_THROWS_AS(stochastic_interpolation(s, sample_brownian(other, {1, 1})), std::invalid_argument);
    const auto wrong = sample_brownian(fine, {8, 8});
    CHECK_THROWS_AS(stochastic_interpolation(s, wrong), std::invalid_argument);
}

TEST_CASE("fine reference") {
    auto fine = make_uniform_grid_ptr(1.0, 64);
    const auto w = sample_brownian(fine, {1, 1});
    const auto x = fine_reference(constant_model(0.0, 0.0, 3.0), w, 1.0);
    for (std::size_t k = 0; k < fine->size(); ++k) CHECK(x.value(k) == 3.0);
    CHECK_THROWS_AS(fine_reference(constant_model(0.0, 0.0, 3.0), w, 0.5), std::invalid_argument);

    const auto model = sine_model(0.5, 1.0, 0.3);
    const auto same = fine_reference(model, w, fine->mesh(), 1.0);
    CHECK(same.values() == euler_nodes(model, w).y_path.values());
}

TEST_CASE("restarting the fine reference reproduces it") {
    auto fine = make_uniform_grid_ptr(1.0, 64);
    const auto w = sample_brownian(fine, {4, 1});
    const auto model = sine_model(0.5, 1.0, 0.3);
    const auto x = fine_reference(model, w, 1.0);
    const Eigen::VectorXd inc = w.increments();
    std::vector<double> out(65);
    euler_continue(model, *fine, std::span<const double>(inc.data(), 64), 20, x.value(20), out);
    for (std::size_t k = 20; k < 65; ++k) CHECK(out[k] == x.value(k));
}

TEST_CASE("ou reference mean") {
    auto fine = make_uniform_grid_ptr(1.0, 64);
    const auto model = ou_model(1.0, 1.0, 1.0);
    const int n = 1000000;
    const Executor exec(1);
    const auto m = parallel_accumulate<ScalarMoments>(exec, n, [&](std::size_t i, ScalarMoments& acc) {
        std::vector<double> inc(64), out(65);
        sample_increments(*fine, {21, i}, inc);
        euler_continue(model, *fine, inc, 0, model.xi0, out);
        acc.add(Eigen::Matrix<double, 1, 1>(out[64]));
    });
    // reference bias (1 - 1/64)^64 - e^-1 = -0.0029
    const double euler = std::pow(1.0 - 1.0 / 64.0, 64);
    CHECK(std::abs(m.mean()[0] - euler) < 4.0 * m.std_error()[0]);
    CHECK(std::abs(m.mean()[0] - std::exp(-1.0)) < 4.0 * m.std_error()[0] + std::abs(euler - std::exp(-1.0)));
}

TEST_CASE("first variation") {
    auto fine = make_uniform_grid_ptr(1.0, 1024);
    const auto w = sample_brownian(fine, {6, 6});
    const auto ou = ou_model(1.0, 1.0, 1.0);
    const auto x = fine_reference(ou, w, 1.0);
    const auto z = first_variation(ou, x, w);
    CHECK(z.path.value(0) == 1.0);
    CHECK(z.path.value(1024) == doctest::Approx(std::exp(-1.0)).epsilon(1e-3));

    const auto flat = constant_model(0.0, 2.0, 0.0);
    const auto zf = first_variation(flat, fine_reference(flat, w, 1.0), w);
    for (std::size_t k = 0; k < fine->size(); ++k) CHECK(zf.path.value(k) == 1.0);

    // chain rule on nested restarts with common noise
    const auto model = sine_model(0.5, 1.0, 0.3);
    const auto xs = fine_reference(model, w, 1.0);
    const auto z0 = first_variation(model, xs, w, 0.0);
    const auto zt = first_variation(model, xs, w, 0.5);
    CHECK(zt.path.value(0) == 0.0);
    CHECK(zt.path.value(512) == 1.0);
    CHECK(z0.path.value(1024) == doctest::Approx(zt.path.value(1024) * z0.path.value(512)).epsilon(1e-12));
    CHECK_THROWS_AS(first_variation(model, xs, w, 0.3), std::invalid_argument);
}

TEST_CASE("gap between X~ and Y has mean zero at fine nodes") {
    auto coarse = make_uniform_grid_ptr(1.0, 4);
    auto fine = std::make_shared<const TimeGrid>(coarse->refine(8));
    const auto model = sine_model(0.5, 1.0, 0.3);
    const int n = 20000;
    MomentAccumulator<double, 3> m;
    for (int i = 0; i < n; ++i) {
        const auto wf = sample_brownian(fine, {17, static_cast<std::uint64_t>(i)});
        Eigen::VectorXd ci(4);
        for (Eigen::Index j = 0; j < 4; ++j) ci[j] = wf.value(static_cast<std::size_t>(8 * j + 8)) - wf.value(static_cast<std::size_t>(8 * j));
        const auto s = euler_nodes(model, brownian_from_increments(coarse, std::span<const double>(ci.data(), 4)));
        const auto xt = stochastic_interpolation(s, wf);
        const auto y = linear_interpolation(s);
        Eigen::Vector3d g;
        int c = 0;
        for (std::size_t k : {3u, 13u, 30u}) g[c++] = xt.value(k) - eval_path(y, fine->node(k));
        m.add(g);
    }
    for (int c = 0; c < 3; ++c) CHECK(std::abs(m.mean()[c]) < 4.0 * m.std_error()[c]);
}
