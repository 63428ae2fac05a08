#pragma once

#include <Eigen/Sparse>

#include <span>

#include "weakpathlab/core_paths.hpp"

namespace wpl {

struct MollifierSpec {
    double epsilon = 0.0;
    int kernel_samples = 32;
};

/// Standard even bump exp(-1 / (1 - u^2)) on (-1, 1), unnormalized.
double bump_kernel(double u) noexcept;

/// Midpoint lattice u_j = (j + 1/2) epsilon / K, j < K, inside supp eta_eps = [0, eps].
Eigen::VectorXd kernel_offsets(const MollifierSpec& spec);

/// eta_eps(u_j) eps / K renormalized to sum to one. Throws ResolutionTooCoarse
/// when eps spans fewer than two path-grid intervals or the lattice has fewer
/// than two points.
Eigen::VectorXd kernel_weights(const MollifierSpec& spec, double grid_step);

/// M^eps restricted to a grid: (M x)(tau_i) = sum_j w_j xbar(tau_i - u_j), where
/// xbar holds x(0) before time 0 and is interpolated by `mode` inside [0, T].
///
/// Linear in the node values, so it is stored as a sparse matrix and shared
/// read-only across workers.
class MollifierOperator {
public:
    MollifierOperator(const MollifierSpec& spec, GridPtr grid, Interpolation mode);

    void apply(std::span<const double> in, std::span<double> out) const;
    /// Output node `row` only.
    double apply_row(std::size_t row, std::span<const double> in) const;
    DiscretePath apply(const DiscretePath& p) const;

    const Eigen::SparseMatrix<double, Eigen::RowMajor>& matrix() const noexcept { return matrix_; }
    const MollifierSpec& spec() const noexcept { return spec_; }
    const GridPtr& grid() const noexcept { return grid_; }
    Interpolation mode() const noexcept { return mode_; }

private:
    MollifierSpec spec_;
    GridPtr grid_;
    Interpolation mode_;
    Eigen::SparseMatrix<double, Eigen::RowMajor> matrix_;
};

/// (eta_eps * xbar) on p's grid; the result is a Linear-mode path.
DiscretePath mollify(const MollifierSpec& spec, const DiscretePath& p);

}  // namespace wpl
