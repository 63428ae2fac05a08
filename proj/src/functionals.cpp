#include "weakpathlab/functionals.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "weakpathlab/errors.hpp"

namespace wpl {

SmoothScalar smooth_identity() {
    return {"identity", [](double u) { return u; }, [](double) { return 1.0; }, [](double) { return 0.0; },
            [](double) { return 0.0; }, [](double) { return 0.0; }, 1.0, 1.0};
}

SmoothScalar smooth_square() {
    return {"square", [](double u) { return u * u; }, [](double u) { return 2.0 * u; }, [](double) { return 2.0; },
            [](double) { return 0.0; }, [](double) { return 0.0; }, 2.0, 1.0};
}

SmoothScalar smooth_cube() {
    return {"cube", [](double u) { return u * u * u; }, [](double u) { return 3.0 * u * u; },
            [](double u) { return 6.0 * u; }, [](double) { return 6.0; }, [](double) { return 0.0; }, 3.0, 1.0};
}

SmoothScalar smooth_sine() {
    return {"sin", [](double u) { return std::sin(u); }, [](double u) { return std::cos(u); },
            [](double u) { return -std::sin(u); }, [](double u) { return -std::cos(u); },
            [](double u) { return std::sin(u); }, 0.0, 1.0};
}

SmoothScalar smooth_scalar_by_name(const std::string& name) {
    if (name == "identity") return smooth_identity();
    if (name == "square") return smooth_square();
    if (name == "cube") return smooth_cube();
    if (name == "sin") return smooth_sine();
    throw UnknownName("integrand", name);
}

namespace {

void check_time(double t, double horizon, const char* what) {
    if (!(horizon > 0.0)) throw std::invalid_argument("functional horizon must be positive");
    if (!(t >= 0.0 && t <= horizon)) throw std::invalid_argument(std::string(what) + " lies outside [0, T]");
}

// Quadrature weight of node k: trapezoid for Linear paths, left sum for step paths.
inline double node_weight(const PathView& x, std::size_t k) {
    const std::size_t last = x.size() - 1;
    if (x.mode == Interpolation::CadlagStep) return k < last ? x.time(k + 1) - x.time(k) : 0.0;
    double w = 0.0;
    if (k > 0) w += x.time(k) - x.time(k - 1);
    if (k < last) w += x.time(k + 1) - x.time(k);
    return 0.5 * w;
}

void check_direction(const PathView& x, const PathView& h) {
    if (h.size() != x.size()) throw std::invalid_argument("direction length differs from the path");
}

}  // namespace

PathFunctional point_functional(double t1, double horizon) {
    check_time(t1, horizon, "evaluation time");
    PathFunctional f;
    f.kind = "point";
    f.params = {{"t", t1}};
    f.eval = [t1](const PathView& x) { return eval_path(x, t1); };
    f.d1 = [t1](const PathView& x, const PathView& h) {
        check_direction(x, h);
        return eval_path(h, t1);
    };
    f.d2 = [](const PathView&, const PathView&, const PathView&) { return 0.0; };
    f.growth_exponent = 1.0;
    return f;
}

PathFunctional product_functional(double t1, double t2, double horizon) {
    check_time(t1, horizon, "first evaluation time");
    check_time(t2, horizon, "second evaluation time");
    PathFunctional f;
    f.kind = "product";
    f.params = {{"t1", t1}, {"t2", t2}};
    f.eval = [t1, t2](const PathView& x) { return eval_path(x, t1) * eval_path(x, t2); };
    f.d1 = [t1, t2](const PathView& x, const PathView& h) {
        check_direction(x, h);
        return eval_path(h, t1) * eval_path(x, t2) + eval_path(x, t1) * eval_path(h, t2);
    };
    f.d2 = [t1, t2](const PathView&, const PathView& h1, const PathView& h2) {
        return eval_path(h1, t1) * eval_path(h2, t2) + eval_path(h2, t1) * eval_path(h1, t2);
    };
    f.growth_exponent = 2.0;
    return f;
}

PathFunctional integral_functional(SmoothScalar g) {
    PathFunctional f;
    f.kind = "integral";
    f.params = {{"g", g.name}};
    f.growth_exponent = g.growth_exponent;
    f.growth_constant = g.growth_constant;
    auto value = g.value, d1 = g.d1, d2 = g.d2;
    f.eval = [value](const PathView& x) {
        double acc = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) acc += node_weight(x, k) * value(x[k]);
        return acc;
    };
    f.d1 = [d1](const PathView& x, const PathView& h) {
        check_direction(x, h);
        double acc = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) acc += node_weight(x, k) * d1(x[k]) * h[k];
        return acc;
    };
    f.d2 = [d2](const PathView& x, const PathView& h1, const PathView& h2) {
        check_direction(x, h1);
        check_direction(x, h2);
        double acc = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) acc += node_weight(x, k) * d2(x[k]) * h1[k] * h2[k];
        return acc;
    };
    return f;
}

namespace {

// Normalized weights p_k = w_k exp(beta (x_k - max)) / sum; returns the max and the sum.
struct SoftmaxPieces {
    double max = 0.0;
    double sum = 0.0;
    double horizon = 0.0;  // quadrature of 1, so constants come back exactly
};

SoftmaxPieces softmax_pieces(const PathView& x, double beta, std::vector<double>* p) {
    if (x.size() < 2) throw std::invalid_argument("smooth max needs a path with at least one step");
    const double sup = sup_norm(x);
    if (beta * sup > 700.0) throw NumericalOverflow("smooth max exponent beyond 700", x.size() - 1);
    SoftmaxPieces out;
    out.max = x[0];
    for (std::size_t k = 1; k < x.size(); ++k) out.max = std::max(out.max, x[k]);
    if (p) p->assign(x.size(), 0.0);
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double q = node_weight(x, k);
        const double w = q * std::exp(beta * (x[k] - out.max));
        out.sum += w;
        out.horizon += q;
        if (p) (*p)[k] = w;
    }
    if (p)
        for (double& v : *p) v /= out.sum;
    return out;
}

}  // namespace

PathFunctional smooth_max_functional(double beta) {
    if (!(beta > 0.0)) throw std::invalid_argument("smooth max needs beta > 0");
    PathFunctional f;
    f.kind = "smooth_max";
    f.params = {{"beta", beta}};
    f.growth_exponent = 1.0;
    f.eval = [beta](const PathView& x) {
        const SoftmaxPieces s = softmax_pieces(x, beta, nullptr);
        return s.max + std::log(s.sum / s.horizon) / beta;
    };
    f.d1 = [beta](const PathView& x, const PathView& h) {
        check_direction(x, h);
        std::vector<double> p;
        softmax_pieces(x, beta, &p);
        double acc = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) acc += p[k] * h[k];
        return acc;
    };
    f.d2 = [beta](const PathView& x, const PathView& h1, const PathView& h2) {
        check_direction(x, h1);
        check_direction(x, h2);
        std::vector<double> p;
        softmax_pieces(x, beta, &p);
        double m1 = 0.0, m2 = 0.0, m12 = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) {
            m1 += p[k] * h1[k];
            m2 += p[k] * h2[k];
            m12 += p[k] * h1[k] * h2[k];
        }
        return beta * (m12 - m1 * m2);
    };
    return f;
}

PathFunctional mollified(const PathFunctional& f, std::shared_ptr<const MollifierOperator> op) {
    if (!op) throw std::invalid_argument("mollified functional needs an operator");
    PathFunctional g = f;
    g.kind = f.kind + "_mollified";
    g.params["epsilon"] = op->spec().epsilon;
    g.params["kernel_samples"] = op->spec().kernel_samples;
    const auto smooth = [op](const PathView& x) {
        std::vector<double> out(x.size());
        op->apply(x.values, out);
        return out;
    };
    const auto view_of = [op](const std::vector<double>& v) {
        return PathView{op->grid().get(), std::span<const double>(v), Interpolation::Linear};
    };
    auto eval = f.eval;
    auto d1 = f.d1;
    auto d2 = f.d2;
    g.eval = [=](const PathView& x) {
        const auto mx = smooth(x);
        return eval(view_of(mx));
    };
    g.d1 = [=](const PathView& x, const PathView& h) {
        const auto mx = smooth(x), mh = smooth(h);
        return d1(view_of(mx), view_of(mh));
    };
    g.d2 = [=](const PathView& x, const PathView& h1, const PathView& h2) {
        const auto mx = smooth(x), m1 = smooth(h1), m2 = smooth(h2);
        return d2(view_of(mx), view_of(m1), view_of(m2));
    };
    return g;
}

}  // namespace wpl
