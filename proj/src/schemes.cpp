#include "weakpathlab/schemes.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "weakpathlab/errors.hpp"

namespace wpl {

void euler_continue(const SdeModel& model, const TimeGrid& grid, std::span<const double> increments,
                    std::size_t start, double start_value, std::span<double> out) {
    const std::size_t n = grid.size();
    out[start] = start_value;
    double y = start_value;
    if (model.affine) {
        const AffineCoefficients c = *model.affine;
        for (std::size_t k = start; k + 1 < n; ++k) {
            const double dt = grid.step(k);
            y = y + (c.drift0 + c.drift1 * y) * dt + (c.diffusion0 + c.diffusion1 * y) * increments[k];
            out[k + 1] = y;
        }
    } else {
        for (std::size_t k = start; k + 1 < n; ++k) {
            const double dt = grid.step(k);
            y = y + model.b(y) * dt + model.sigma(y) * increments[k];
            out[k + 1] = y;
        }
    }
    if (!std::isfinite(y)) {
        for (std::size_t k = start; k < n; ++k)
            if (!std::isfinite(out[k])) throw NumericalOverflow("non-finite Euler value", k);
    }
}

SchemeOutput euler_nodes(const SdeModel& model, const BrownianPath& w) {
    const TimeGrid& grid = w.grid();
    const Eigen::VectorXd inc = w.increments();
    Eigen::VectorXd nodes(static_cast<Eigen::Index>(grid.size()));
    euler_continue(model, grid, std::span<const double>(inc.data(), static_cast<std::size_t>(inc.size())), 0, model.xi0,
                   std::span<double>(nodes.data(), grid.size()));
    const Eigen::Index steps = static_cast<Eigen::Index>(grid.steps());
    Eigen::VectorXd drift(steps);
    Eigen::VectorXd diffusion(steps);
    for (Eigen::Index k = 0; k < steps; ++k) {
        drift[k] = model.drift(nodes[k]);
        diffusion[k] = model.diffusion(nodes[k]);
    }
    DiscretePath y(w.grid_ptr(), nodes, Interpolation::Linear);
    return SchemeOutput{w.grid_ptr(), nodes, inc, drift, diffusion, std::move(y)};
}

DiscretePath linear_interpolation(const SchemeOutput& s) { return DiscretePath(s.grid, s.nodes, Interpolation::Linear); }

namespace kernels {

void first_variation(const SdeModel& model, std::span<const double> x, std::span<const double> increments,
                     const TimeGrid& grid, std::size_t start, std::span<double> z) {
    const std::size_t n = grid.size();
    for (std::size_t k = 0; k < start; ++k) z[k] = 0.0;
    double v = 1.0;
    z[start] = v;
    for (std::size_t k = start; k + 1 < n; ++k) {
        v *= 1.0 + model.drift_derivative(x[k]) * grid.step(k) + model.diffusion_derivative(x[k]) * increments[k];
        z[k + 1] = v;
    }
    if (!std::isfinite(v)) throw NumericalOverflow("non-finite first variation", n - 1);
}

void stochastic_interpolation(std::span<const std::size_t> coarse_index, std::span<const double> y,
                              std::span<const double> drift, std::span<const double> diffusion,
                              const TimeGrid& fine, std::span<const double> w_fine, std::span<double> out) {
    out[0] = y[0];
    for (std::size_t n = 0; n + 1 < coarse_index.size(); ++n) {
        const std::size_t lo = coarse_index[n];
        const std::size_t hi = coarse_index[n + 1];
        const double t0 = fine.node(lo);
        const double w0 = w_fine[lo];
        for (std::size_t j = lo + 1; j < hi; ++j)
            out[j] = y[n] + drift[n] * (fine.node(j) - t0) + diffusion[n] * (w_fine[j] - w0);
        // The interpolation meets the Euler node exactly at interval ends.
        out[hi] = y[n + 1];
    }
}

}  // namespace kernels

DiscretePath stochastic_interpolation(const SchemeOutput& s, const BrownianPath& w_fine) {
    const TimeGrid& coarse = *s.grid;
    const TimeGrid& fine = w_fine.grid();
    if (!fine.nests(coarse)) throw std::invalid_argument("fine grid does not nest the scheme grid");
    std::vector<std::size_t> index(coarse.size());
    for (std::size_t n = 0; n < coarse.size(); ++n) index[n] = *fine.index_of(coarse.node(n));
    for (std::size_t n = 0; n + 1 < coarse.size(); ++n) {
        const double dw = w_fine.value(index[n + 1]) - w_fine.value(index[n]);
        const double used = s.increments[static_cast<Eigen::Index>(n)];
        if (std::abs(dw - used) > 1e-10 * (1.0 + std::abs(used)))
            throw std::invalid_argument("fine Brownian path is inconsistent with the scheme increments");
    }
    const Eigen::VectorXd w = w_fine.path().scalar_values();
    Eigen::VectorXd out(static_cast<Eigen::Index>(fine.size()));
    const auto span_of = [](const Eigen::VectorXd& v) {
        return std::span<const double>(v.data(), static_cast<std::size_t>(v.size()));
    };
    kernels::stochastic_interpolation(index, span_of(s.nodes), span_of(s.drift_at_nodes), span_of(s.diffusion_at_nodes),
                                      fine, span_of(w), std::span<double>(out.data(), fine.size()));
    return DiscretePath(w_fine.grid_ptr(), out, Interpolation::Linear);
}

DiscretePath fine_reference(const SdeModel& model, const BrownianPath& w_fine, double coarse_mesh,
                            double min_refinement) {
    if (!(min_refinement >= 1.0)) throw std::invalid_argument("minimum refinement factor must be at least 1");
    if (w_fine.grid().mesh() * min_refinement > coarse_mesh * (1.0 + 1e-12))
        throw std::invalid_argument("reference grid is not fine enough for the configured refinement factor");
    return euler_nodes(model, w_fine).y_path;
}

VariationPath first_variation(const SdeModel& model, const DiscretePath& x_ref, const BrownianPath& w_fine,
                              double start_time) {
    if (!(x_ref.grid() == w_fine.grid())) throw std::invalid_argument("reference path and Brownian path must share a grid");
    const auto start = x_ref.grid().index_of(start_time);
    if (!start) throw std::invalid_argument("variation start time is not a grid node");
    const Eigen::VectorXd x = x_ref.scalar_values();
    const Eigen::VectorXd inc = w_fine.increments();
    Eigen::VectorXd z(x.size());
    kernels::first_variation(model, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())),
                             std::span<const double>(inc.data(), static_cast<std::size_t>(inc.size())), x_ref.grid(),
                             *start, std::span<double>(z.data(), static_cast<std::size_t>(z.size())));
    return VariationPath{DiscretePath(x_ref.grid_ptr(), z, Interpolation::Linear), x_ref, *start};
}

}  // namespace wpl
