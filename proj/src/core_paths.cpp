#include "weakpathlab/core_paths.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace wpl {

TimeGrid::TimeGrid(Eigen::VectorXd nodes) : nodes_(std::move(nodes)) {
    if (nodes_.size() < 1) throw std::invalid_argument("time grid needs at least one node");
    if (nodes_[0] != 0.0) throw std::invalid_argument("time grid must start at 0");
    if (!nodes_.allFinite()) throw std::invalid_argument("time grid nodes must be finite");
    for (Eigen::Index k = 0; k + 1 < nodes_.size(); ++k) {
        const double gap = nodes_[k + 1] - nodes_[k];
        if (!(gap > 0.0)) throw std::invalid_argument("time grid nodes must be strictly increasing");
        mesh_ = std::max(mesh_, gap);
    }
}

std::optional<std::size_t> TimeGrid::index_of(double t) const {
    const double* first = nodes_.data();
    const double* last = first + nodes_.size();
    const double* it = std::lower_bound(first, last, t);
    if (it == last || *it != t) return std::nullopt;
    return static_cast<std::size_t>(it - first);
}

std::size_t TimeGrid::last_node_at_or_before(double t) const {
    if (!(t >= 0.0 && t <= horizon())) throw std::out_of_range("time outside [0, T]");
    const double* first = nodes_.data();
    const double* last = first + nodes_.size();
    const double* it = std::upper_bound(first, last, t);
    return static_cast<std::size_t>(it - first) - 1;
}

TimeGrid TimeGrid::refine(std::size_t factor) const {
    if (factor == 0) throw std::invalid_argument("refinement factor must be positive");
    Eigen::VectorXd fine(static_cast<Eigen::Index>(steps() * factor + 1));
    Eigen::Index out = 0;
    for (std::size_t k = 0; k < steps(); ++k) {
        const double a = node(k);
        const double h = step(k) / static_cast<double>(factor);
        fine[out++] = a;
        for (std::size_t j = 1; j < factor; ++j) fine[out++] = a + static_cast<double>(j) * h;
    }
    fine[out] = horizon();
    return TimeGrid(std::move(fine));
}

TimeGrid TimeGrid::prefix(std::size_t count) const {
    if (count == 0 || count > size()) throw std::invalid_argument("prefix length out of range");
    return TimeGrid(nodes_.head(static_cast<Eigen::Index>(count)));
}

bool TimeGrid::nests(const TimeGrid& coarse) const {
    if (coarse.horizon() != horizon()) return false;
    for (Eigen::Index k = 0; k < coarse.nodes_.size(); ++k)
        if (!index_of(coarse.nodes_[k])) return false;
    return true;
}

TimeGrid make_uniform_grid(double horizon, long steps) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw std::invalid_argument("horizon must be positive");
    if (steps < 1) throw std::invalid_argument("number of steps must be positive");
    Eigen::VectorXd nodes(steps + 1);
    for (long k = 0; k < steps; ++k) nodes[k] = horizon * static_cast<double>(k) / static_cast<double>(steps);
    nodes[steps] = horizon;
    return TimeGrid(std::move(nodes));
}

GridPtr make_uniform_grid_ptr(double horizon, long steps) {
    return std::make_shared<const TimeGrid>(make_uniform_grid(horizon, steps));
}

std::string to_string(Interpolation mode) {
    return mode == Interpolation::Linear ? "linear" : "cadlag";
}

Interpolation interpolation_from_string(const std::string& name) {
    if (name == "linear") return Interpolation::Linear;
    if (name == "cadlag") return Interpolation::CadlagStep;
    throw std::invalid_argument("unknown interpolation mode '" + name + "'");
}

double eval_path(const PathView& p, double t) {
    const std::size_t n = p.size();
    const double horizon = p.grid->node(n - 1);
    if (!(t >= 0.0 && t <= horizon)) throw std::out_of_range("evaluation time outside [0, T]");
    const double* first = p.grid->nodes().data();
    const double* it = std::upper_bound(first, first + n, t);
    const std::size_t k = static_cast<std::size_t>(it - first) - 1;
    const double tk = first[k];
    if (t == tk || p.mode == Interpolation::CadlagStep || k + 1 == n) return p.values[k];
    const double lambda = (t - tk) / (first[k + 1] - tk);
    return p.values[k] + lambda * (p.values[k + 1] - p.values[k]);
}

double sup_norm(const PathView& p) {
    double m = 0.0;
    for (double v : p.values) m = std::max(m, std::abs(v));
    return m;
}

DiscretePath::DiscretePath(GridPtr grid, Eigen::MatrixXd values, Interpolation mode)
    : grid_(std::move(grid)), values_(std::move(values)), mode_(mode) {
    if (!grid_) throw std::invalid_argument("path requires a grid");
    if (static_cast<std::size_t>(values_.rows()) != grid_->size())
        throw std::invalid_argument("path values must match the grid node count");
    if (values_.cols() < 1) throw std::invalid_argument("path dimension must be positive");
    if (!values_.allFinite()) throw std::invalid_argument("path values must be finite");
}

double DiscretePath::value(std::size_t k) const {
    if (dimension() != 1) throw std::invalid_argument("scalar access on a multi-dimensional path");
    return values_(static_cast<Eigen::Index>(k), 0);
}

Eigen::VectorXd DiscretePath::scalar_values() const {
    if (dimension() != 1) throw std::invalid_argument("scalar access on a multi-dimensional path");
    return values_.col(0);
}

PathView DiscretePath::view() const {
    if (dimension() != 1) throw std::invalid_argument("scalar view of a multi-dimensional path");
    return PathView{grid_.get(), std::span<const double>(values_.data(), size()), mode_};
}

double eval_path(const DiscretePath& p, double t) { return eval_path(p.view(), t); }

Eigen::VectorXd eval_components(const DiscretePath& p, double t) {
    Eigen::VectorXd out(p.values().cols());
    for (Eigen::Index c = 0; c < p.values().cols(); ++c) {
        const PathView v{&p.grid(), std::span<const double>(p.values().col(c).data(), p.size()), p.mode()};
        out[c] = eval_path(v, t);
    }
    return out;
}

DiscretePath restrict(const DiscretePath& p, double t) {
    const auto k = p.grid().index_of(t);
    if (!k) throw std::invalid_argument("restriction time is not a grid node");
    if (*k + 1 == p.size()) return p;
    auto grid = std::make_shared<const TimeGrid>(p.grid().prefix(*k + 1));
    return DiscretePath(std::move(grid), Eigen::MatrixXd(p.values().topRows(static_cast<Eigen::Index>(*k + 1))),
                        p.mode());
}

double sup_norm(const DiscretePath& p) { return p.values().cwiseAbs().maxCoeff(); }

DiscretePath vertical_bump(const DiscretePath& p, double h) {
    Eigen::MatrixXd values = p.values();
    values.row(values.rows() - 1).array() += h;
    return DiscretePath(p.grid_ptr(), std::move(values), Interpolation::CadlagStep);
}

DiscretePath horizontal_extension(const DiscretePath& p, const GridPtr& longer, double until) {
    const std::size_t n = p.size();
    if (longer->size() < n || longer->node(n - 1) != p.grid().horizon())
        throw std::invalid_argument("extension grid does not extend the path grid");
    const auto end = longer->index_of(until);
    if (!end || *end + 1 < n) throw std::invalid_argument("extension end is not a later node of the grid");
    const auto count = static_cast<Eigen::Index>(*end + 1);
    Eigen::MatrixXd values(count, p.values().cols());
    values.topRows(static_cast<Eigen::Index>(n)) = p.values();
    for (Eigen::Index r = static_cast<Eigen::Index>(n); r < count; ++r) values.row(r) = p.values().row(n - 1);
    auto grid = count == static_cast<Eigen::Index>(longer->size())
                    ? longer
                    : std::make_shared<const TimeGrid>(longer->prefix(static_cast<std::size_t>(count)));
    return DiscretePath(std::move(grid), std::move(values), p.mode());
}

std::string to_csv(const DiscretePath& p) {
    std::string out = "t,x\n";
    char buf[64];
    for (std::size_t k = 0; k < p.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g", p.grid().node(k));
        out += buf;
        for (Eigen::Index c = 0; c < p.values().cols(); ++c) {
            std::snprintf(buf, sizeof buf, ",%.17g", p.values()(static_cast<Eigen::Index>(k), c));
            out += buf;
        }
        out += '\n';
    }
    return out;
}

nlohmann::json to_json(const DiscretePath& p) {
    nlohmann::json j;
    j["grid"] = std::vector<double>(p.grid().nodes().data(), p.grid().nodes().data() + p.size());
    if (p.dimension() == 1) {
        j["values"] = std::vector<double>(p.values().data(), p.values().data() + p.size());
    } else {
        auto rows = nlohmann::json::array();
        for (Eigen::Index r = 0; r < p.values().rows(); ++r) {
            Eigen::VectorXd row = p.values().row(r).transpose();
            rows.push_back(std::vector<double>(row.data(), row.data() + row.size()));
        }
        j["values"] = rows;
    }
    j["mode"] = to_string(p.mode());
    return j;
}

DiscretePath path_from_json(const nlohmann::json& j) {
    const auto nodes = j.at("grid").get<std::vector<double>>();
    const auto& vals = j.at("values");
    auto grid = std::make_shared<const TimeGrid>(Eigen::Map<const Eigen::VectorXd>(nodes.data(), static_cast<Eigen::Index>(nodes.size())));
    const auto mode = interpolation_from_string(j.at("mode").get<std::string>());
    if (vals.empty() || !vals.front().is_array()) {
        const auto v = vals.get<std::vector<double>>();
        return DiscretePath(std::move(grid), Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()))), mode);
    }
    Eigen::MatrixXd m(static_cast<Eigen::Index>(vals.size()), static_cast<Eigen::Index>(vals.front().size()));
    for (std::size_t r = 0; r < vals.size(); ++r) {
        const auto row = vals[r].get<std::vector<double>>();
        if (static_cast<Eigen::Index>(row.size()) != m.cols()) throw std::invalid_argument("ragged path values");
        for (std::size_t c = 0; c < row.size(); ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
    }
    return DiscretePath(std::move(grid), std::move(m), mode);
}

}  // namespace wpl
