#include "weakpathlab/audits.hpp"

#include <algorithm>
#include <cmath>

#include "weakpathlab/haar.hpp"
#include "weakpathlab/mollifier.hpp"

namespace wpl {

namespace {

AuditCheck upper(std::string name, double value, double tol) {
    return {std::move(name), value, tol, value <= tol};
}

DiscretePath random_path(const GridPtr& g, const SeedSpec& seed, Interpolation mode) {
    std::vector<double> inc(g->steps());
    sample_increments(*g, seed, inc);
    Eigen::VectorXd v(static_cast<Eigen::Index>(g->size()));
    StreamEngine e(substream(seed, 1));
    v[0] = 4.0 * (e.uniform_open() - 0.5);
    for (std::size_t k = 0; k < inc.size(); ++k) v[static_cast<Eigen::Index>(k + 1)] = v[static_cast<Eigen::Index>(k)] + inc[k];
    return DiscretePath(g, v, mode);
}

}  // namespace

std::vector<AuditCheck> mollifier_audit(std::size_t n_paths, const SeedSpec& seed) {
    auto g = make_uniform_grid_ptr(1.0, 128);
    const MollifierSpec spec{4.0 / 128.0, 32};
    double growth = 0.0, nonlinear = 0.0, leak = 0.0;
    std::size_t i = 0;
    for (auto mode : {Interpolation::Linear, Interpolation::CadlagStep}) {
        const MollifierOperator op(spec, g, mode);
        for (std::size_t p = 0; p < n_paths; ++p, ++i) {
            const auto x = random_path(g, substream(seed, 2 * i), mode);
            const auto y = random_path(g, substream(seed, 2 * i + 1), mode);
            const auto mx = op.apply(x);
            growth = std::max(growth, sup_norm(mx) / sup_norm(x) - 1.0);

            const double a = 1.7, b = -0.3;
            const auto comb = op.apply(DiscretePath(g, Eigen::MatrixXd(a * x.values() + b * y.values()), mode));
            const Eigen::MatrixXd sum = a * mx.values() + b * op.apply(y).values();
            nonlinear = std::max(nonlinear, (comb.values() - sum).cwiseAbs().maxCoeff());

            const Eigen::Index cut = static_cast<Eigen::Index>(p % 120) + 4;
            Eigen::MatrixXd edited = x.values();
            edited.bottomRows(edited.rows() - cut - 1).array() += 5.0;
            const auto me = op.apply(DiscretePath(g, edited, mode));
            leak = std::max(leak, (me.values().topRows(cut + 1) - mx.values().topRows(cut + 1)).cwiseAbs().maxCoeff());
        }
    }

    auto fine = make_uniform_grid_ptr(1.0, 1000);
    const double eps = 0.1;
    const auto mr = mollify({eps, 32}, DiscretePath(fine, fine->nodes(), Interpolation::Linear));
    double ramp = 0.0;
    for (std::size_t k = 100; k < fine->size(); ++k) ramp = std::max(ramp, std::abs(mr.value(k) - (fine->node(k) - eps / 2)));

    // Weights sum to one up to rounding, so the sup norm may grow by an ulp.
    return {upper("contraction", growth, 1e-15), upper("linearity", nonlinear, 1e-10),
            upper("causality", leak, 0.0), upper("ramp", ramp, 1e-6)};
}

std::vector<AuditCheck> haar_round_trip(int max_level, std::size_t n_paths, const SeedSpec& seed) {
    const std::size_t finest = std::size_t{1} << max_level;
    auto g = make_uniform_grid_ptr(1.0, static_cast<long>(finest));
    std::vector<AuditCheck> out;
    for (int level = 0; level <= max_level; ++level) {
        const std::size_t stride = finest >> level;
        double err = 0.0;
        for (std::size_t p = 0; p < n_paths; ++p) {
            const auto w = sample_brownian(g, substream(seed, p));
            const auto c = haar_coefficients(w, Interval{0.0, 1.0}, level);
            const auto r = schauder_reconstruct(c, Interval{0.0, 1.0}, g);
            for (std::size_t k = 0; k < g->size(); k += stride) err = std::max(err, std::abs(r.value(k) - w.value(k)));
        }
        out.push_back(upper("haar_level_" + std::to_string(level), err, 1e-12));
    }
    return out;
}

}  // namespace wpl
