#pragma once

#include <span>

#include "weakpathlab/models.hpp"
#include "weakpathlab/random.hpp"

namespace wpl {

/// Euler-Maruyama nodes Y(tau_n) together with what X~ needs later: the
/// Brownian increments that drove them and the frozen coefficient values.
struct SchemeOutput {
    GridPtr grid;
    Eigen::VectorXd nodes;
    Eigen::VectorXd increments;
    Eigen::VectorXd drift_at_nodes;      // b(Y(tau_n)), n < N
    Eigen::VectorXd diffusion_at_nodes;  // sigma(Y(tau_n)), n < N
    DiscretePath y_path;
};

/// Y(tau_{n+1}) = Y(tau_n) + b(Y(tau_n)) dt_n + sigma(Y(tau_n)) dW_n, Y(0) = xi0.
SchemeOutput euler_nodes(const SdeModel& model, const BrownianPath& w);

/// Euler recursion from out[start] = start_value through the last node,
/// writing out[start..N]. Throws NumericalOverflow on a non-finite value.
void euler_continue(const SdeModel& model, const TimeGrid& grid, std::span<const double> increments,
                    std::size_t start, double start_value, std::span<double> out);

/// Y as a Linear-mode path through the nodes.
DiscretePath linear_interpolation(const SchemeOutput& s);

/// X~(t) = Y(tau_n) + b(Y(tau_n))(t - tau_n) + sigma(Y(tau_n))(W(t) - W(tau_n))
/// on each [tau_n, tau_{n+1}], sampled at the nodes of w_fine's grid.
DiscretePath stochastic_interpolation(const SchemeOutput& s, const BrownianPath& w_fine);

/// Fine-grid Euler path standing in for the exact solution X.
/// Requires w_fine's mesh <= coarse_mesh / min_refinement.
DiscretePath fine_reference(const SdeModel& model, const BrownianPath& w_fine, double coarse_mesh,
                            double min_refinement = 64.0);

/// First variation Z = dX/dx along a path, started at `start_time` with Z = 1:
/// Z_{j+1} = Z_j (1 + b'(X_j) dt_j + sigma'(X_j) dW_j).
/// Nodes before the start hold 0, which realizes 1_[t,T] Z at node resolution.
struct VariationPath {
    DiscretePath path;
    DiscretePath base;
    std::size_t start_index = 0;
};

VariationPath first_variation(const SdeModel& model, const DiscretePath& x_ref, const BrownianPath& w_fine,
                              double start_time = 0.0);

namespace kernels {

/// In-place Euler first variation along x (same grid as the increments).
void first_variation(const SdeModel& model, std::span<const double> x, std::span<const double> increments,
                     const TimeGrid& grid, std::size_t start, std::span<double> z);

/// X~ on a fine grid given the coarse nodes and the cumulative fine Brownian
/// values. `coarse_index[n]` is the fine index of coarse node n.
void stochastic_interpolation(std::span<const std::size_t> coarse_index, std::span<const double> y,
                              std::span<const double> drift, std::span<const double> diffusion,
                              const TimeGrid& fine, std::span<const double> w_fine, std::span<double> out);

}  // namespace kernels

}  // namespace wpl
