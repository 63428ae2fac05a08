#pragma once

#include <Eigen/Dense>

#include "weakpathlab/random.hpp"

namespace wpl {

struct Interval {
    double lo = 0.0;
    double hi = 1.0;
    double length() const noexcept { return hi - lo; }
};

/// Coefficients c_k = int H_k dW, k = 0 .. 2^levels - 1, of the Haar basis
/// rescaled to `interval` (orthonormal in L^2 of the interval).
///
/// The path grid must contain every dyadic point lo + j (hi - lo) / 2^levels
/// exactly; the stochastic integrals are then exact sums of stored increments.
Eigen::VectorXd haar_coefficients(const BrownianPath& w, Interval interval, int levels);
/// Same, on the n-th interval of `partition`.
Eigen::VectorXd haar_coefficients(const BrownianPath& w, const TimeGrid& partition, std::size_t n, int levels);

/// Value of the rescaled Schauder function S_k = int_lo^t H_k at time t.
double schauder_function(std::size_t k, Interval interval, double t);

/// offset + sum_k c_k S_k on every node of `grid`, each S_k extended by zero
/// off `interval`. The coefficient count must be a power of two.
DiscretePath schauder_reconstruct(const Eigen::VectorXd& coeffs, Interval interval, const GridPtr& grid,
                                  double offset = 0.0);

}  // namespace wpl
