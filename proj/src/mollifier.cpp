#include "weakpathlab/mollifier.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "weakpathlab/errors.hpp"

namespace wpl {

double bump_kernel(double u) noexcept {
    const double r = 1.0 - u * u;
    return r > 0.0 ? std::exp(-1.0 / r) : 0.0;
}

Eigen::VectorXd kernel_offsets(const MollifierSpec& spec) {
    if (!(spec.epsilon > 0.0)) throw std::invalid_argument("mollifier epsilon must be positive");
    if (spec.kernel_samples < 2) throw ResolutionTooCoarse("mollifier lattice needs at least two points");
    const int k = spec.kernel_samples;
    Eigen::VectorXd u(k);
    for (int j = 0; j < k; ++j) u[j] = spec.epsilon * (2.0 * j + 1.0) / (2.0 * k);
    return u;
}

Eigen::VectorXd kernel_weights(const MollifierSpec& spec, double grid_step) {
    if (!(spec.epsilon > 0.0)) throw std::invalid_argument("mollifier epsilon must be positive");
    if (!(grid_step > 0.0)) throw std::invalid_argument("grid step must be positive");
    if (spec.kernel_samples < 2) throw ResolutionTooCoarse("mollifier lattice needs at least two points");
    if (spec.epsilon < 2.0 * grid_step * (1.0 - 1e-12))
        throw ResolutionTooCoarse("mollifier width must cover at least two grid intervals");
    const int k = spec.kernel_samples;
    Eigen::VectorXd w(k);
    for (int j = 0; j < k; ++j) {
        // Scaled argument (2/eps)(u_j - eps/2); symmetric pairs are exact negatives.
        const double arg = (2.0 * j + 1.0 - k) / static_cast<double>(k);
        w[j] = bump_kernel(arg);
    }
    w /= w.sum();
    return w;
}

MollifierOperator::MollifierOperator(const MollifierSpec& spec, GridPtr grid, Interpolation mode)
    : spec_(spec), grid_(std::move(grid)), mode_(mode) {
    const TimeGrid& g = *grid_;
    if (g.size() < 2) throw std::invalid_argument("mollifier needs a grid with at least one step");
    const Eigen::VectorXd w = kernel_weights(spec_, g.mesh());
    const Eigen::VectorXd u = kernel_offsets(spec_);

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(g.size() * static_cast<std::size_t>(w.size()) * 2);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double t = g.node(i);
        for (Eigen::Index j = 0; j < w.size(); ++j) {
            const double s = t - u[j];
            const auto row = static_cast<Eigen::Index>(i);
            if (s < 0.0) {
                triplets.emplace_back(row, 0, w[j]);
                continue;
            }
            const std::size_t k = g.last_node_at_or_before(s);
            const double tk = g.node(k);
            if (mode_ == Interpolation::CadlagStep || s == tk || k + 1 == g.size()) {
                triplets.emplace_back(row, static_cast<Eigen::Index>(k), w[j]);
                continue;
            }
            const double lambda = (s - tk) / (g.node(k + 1) - tk);
            triplets.emplace_back(row, static_cast<Eigen::Index>(k), w[j] * (1.0 - lambda));
            triplets.emplace_back(row, static_cast<Eigen::Index>(k + 1), w[j] * lambda);
        }
    }
    const auto n = static_cast<Eigen::Index>(g.size());
    matrix_.resize(n, n);
    matrix_.setFromTriplets(triplets.begin(), triplets.end());
    matrix_.makeCompressed();
}

void MollifierOperator::apply(std::span<const double> in, std::span<double> out) const {
    if (in.size() != grid_->size() || out.size() != grid_->size())
        throw std::invalid_argument("mollifier input does not match its grid");
    const Eigen::Map<const Eigen::VectorXd> x(in.data(), static_cast<Eigen::Index>(in.size()));
    Eigen::Map<Eigen::VectorXd> y(out.data(), static_cast<Eigen::Index>(out.size()));
    y.noalias() = matrix_ * x;
}

double MollifierOperator::apply_row(std::size_t row, std::span<const double> in) const {
    double acc = 0.0;
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(matrix_, static_cast<Eigen::Index>(row)); it; ++it)
        acc += it.value() * in[static_cast<std::size_t>(it.col())];
    return acc;
}

DiscretePath MollifierOperator::apply(const DiscretePath& p) const {
    if (!(p.grid() == *grid_)) throw std::invalid_argument("path grid differs from the mollifier grid");
    if (p.mode() != mode_) throw std::invalid_argument("path interpolation differs from the mollifier's");
    Eigen::MatrixXd out(p.values().rows(), p.values().cols());
    for (Eigen::Index c = 0; c < out.cols(); ++c) out.col(c) = matrix_ * p.values().col(c);
    return DiscretePath(p.grid_ptr(), std::move(out), Interpolation::Linear);
}

DiscretePath mollify(const MollifierSpec& spec, const DiscretePath& p) {
    return MollifierOperator(spec, p.grid_ptr(), p.mode()).apply(p);
}

}  // namespace wpl
