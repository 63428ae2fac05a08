#pragma once

#include <functional>
#include <memory>
#include <string>

#include "json.hpp"
#include "weakpathlab/core_paths.hpp"
#include "weakpathlab/mollifier.hpp"

namespace wpl {

/// A scalar map with derivatives up to order four.
struct SmoothScalar {
    std::string name;
    std::function<double(double)> value, d1, d2, d3, d4;
    /// |g(u)| <= growth_constant (1 + |u|^growth_exponent).
    double growth_exponent = 0.0;
    double growth_constant = 1.0;
};

SmoothScalar smooth_identity();
SmoothScalar smooth_square();
SmoothScalar smooth_cube();
SmoothScalar smooth_sine();
/// "identity", "square", "cube" or "sin"; anything else is UnknownName.
SmoothScalar smooth_scalar_by_name(const std::string& name);

/// f on paths with its first and second directional derivatives.
///
/// Evaluators take PathViews so inner Monte Carlo loops can work on scratch
/// buffers. Directions share the grid and interpolation mode of the base path.
struct PathFunctional {
    using Eval = std::function<double(const PathView&)>;
    using First = std::function<double(const PathView&, const PathView&)>;
    using Second = std::function<double(const PathView&, const PathView&, const PathView&)>;

    std::string kind;
    nlohmann::json params;
    Eval eval;
    First d1;
    Second d2;
    double growth_exponent = 0.0;
    /// |f(x)| <= growth_constant (1 + |x|_inf^q).
    double growth_constant = 1.0;
    int smoothness_order = 4;

    double operator()(const PathView& x) const { return eval(x); }
    double operator()(const DiscretePath& x) const { return eval(x.view()); }
    double derivative(const DiscretePath& x, const DiscretePath& h) const { return d1(x.view(), h.view()); }
    double second_derivative(const DiscretePath& x, const DiscretePath& h1, const DiscretePath& h2) const {
        return d2(x.view(), h1.view(), h2.view());
    }
};

/// f(x) = x(t1). Between nodes x follows the path's interpolation mode.
PathFunctional point_functional(double t1, double horizon);
/// f(x) = x(t1) x(t2).
PathFunctional product_functional(double t1, double t2, double horizon);
/// f(x) = int_0^T g(x(t)) dt: trapezoid for Linear paths, exact left sum for step paths.
PathFunctional integral_functional(SmoothScalar g);
/// f(x) = beta^-1 log(T^-1 int_0^T exp(beta x(t)) dt), same quadrature as the integral.
/// Throws NumericalOverflow when beta |x|_inf > 700.
PathFunctional smooth_max_functional(double beta);

/// f^eps = f o M^eps on the operator's grid. Derivatives use linearity of M:
/// D f^eps(x)(h) = D f(Mx)(Mh). Inputs must cover the whole grid.
PathFunctional mollified(const PathFunctional& f, std::shared_ptr<const MollifierOperator> op);

}  // namespace wpl
