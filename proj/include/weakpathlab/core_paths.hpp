#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>

#include "json.hpp"

namespace wpl {

/// Strictly increasing time nodes 0 = tau_0 < ... < tau_N = T.
///
/// Node values are compared with exact equality everywhere. Grids that are
/// meant to nest must be produced by refine() or prefix(), never recomputed.
class TimeGrid {
public:
    explicit TimeGrid(Eigen::VectorXd nodes);

    std::size_t size() const noexcept { return static_cast<std::size_t>(nodes_.size()); }
    std::size_t steps() const noexcept { return size() - 1; }
    double horizon() const noexcept { return nodes_[nodes_.size() - 1]; }
    double mesh() const noexcept { return mesh_; }
    double node(std::size_t k) const { return nodes_[static_cast<Eigen::Index>(k)]; }
    double step(std::size_t k) const { return node(k + 1) - node(k); }
    const Eigen::VectorXd& nodes() const noexcept { return nodes_; }

    /// Index of the node equal to t, if any.
    std::optional<std::size_t> index_of(double t) const;
    /// Largest k with tau_k <= t. Requires 0 <= t <= T.
    std::size_t last_node_at_or_before(double t) const;

    /// Splits every interval into `factor` equal pieces; original nodes are kept bit-exact.
    TimeGrid refine(std::size_t factor) const;
    /// The first `count` nodes as a grid on [0, tau_{count-1}].
    TimeGrid prefix(std::size_t count) const;
    /// True when every node of `coarse` is a node of this grid and horizons agree.
    bool nests(const TimeGrid& coarse) const;

    friend bool operator==(const TimeGrid& a, const TimeGrid& b) {
        return a.nodes_.size() == b.nodes_.size() && (a.nodes_.array() == b.nodes_.array()).all();
    }

private:
    Eigen::VectorXd nodes_;
    double mesh_ = 0.0;
};

using GridPtr = std::shared_ptr<const TimeGrid>;

/// N+1 equispaced nodes on [0, T]; the last node is T exactly.
TimeGrid make_uniform_grid(double horizon, long steps);
GridPtr make_uniform_grid_ptr(double horizon, long steps);

enum class Interpolation { Linear, CadlagStep };

std::string to_string(Interpolation mode);
Interpolation interpolation_from_string(const std::string& name);

/// Non-owning scalar path: the first values.size() nodes of *grid.
struct PathView {
    const TimeGrid* grid = nullptr;
    std::span<const double> values;
    Interpolation mode = Interpolation::Linear;

    std::size_t size() const noexcept { return values.size(); }
    double horizon() const { return grid->node(values.size() - 1); }
    double time(std::size_t k) const { return grid->node(k); }
    double operator[](std::size_t k) const { return values[k]; }
};

double eval_path(const PathView& p, double t);
double sup_norm(const PathView& p);

/// Node values of a path on a TimeGrid plus the rule used between nodes.
///
/// Values are stored as an (nodes x dimension) matrix. All shipped schemes use
/// dimension 1; the scalar accessors and view() require it.
class DiscretePath {
public:
    DiscretePath(GridPtr grid, Eigen::MatrixXd values, Interpolation mode);

    const TimeGrid& grid() const noexcept { return *grid_; }
    const GridPtr& grid_ptr() const noexcept { return grid_; }
    const Eigen::MatrixXd& values() const noexcept { return values_; }
    std::size_t dimension() const noexcept { return static_cast<std::size_t>(values_.cols()); }
    std::size_t size() const noexcept { return static_cast<std::size_t>(values_.rows()); }
    Interpolation mode() const noexcept { return mode_; }

    double value(std::size_t k) const;
    Eigen::VectorXd scalar_values() const;
    PathView view() const;

private:
    GridPtr grid_;
    Eigen::MatrixXd values_;
    Interpolation mode_;
};

double eval_path(const DiscretePath& p, double t);
/// Componentwise evaluation for paths of any dimension.
Eigen::VectorXd eval_components(const DiscretePath& p, double t);

DiscretePath restrict(const DiscretePath& p, double t);
double sup_norm(const DiscretePath& p);
/// x_t^h: last value moved by h, mode forced to CadlagStep.
DiscretePath vertical_bump(const DiscretePath& p, double h);
/// x_{t,h}: p held flat from its final node up to node `until` of `longer`.
/// `longer` must extend p's grid.
DiscretePath horizontal_extension(const DiscretePath& p, const GridPtr& longer, double until);

std::string to_csv(const DiscretePath& p);
nlohmann::json to_json(const DiscretePath& p);
DiscretePath path_from_json(const nlohmann::json& j);

}  // namespace wpl
