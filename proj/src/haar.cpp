#include "weakpathlab/haar.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace wpl {

namespace {

bool is_power_of_two(Eigen::Index n) { return n > 0 && (n & (n - 1)) == 0; }

// k = 2^j + l  ->  (j, l); k = 0 is the constant function.
std::pair<int, std::size_t> haar_level(std::size_t k) {
    int j = 0;
    while ((std::size_t{2} << j) <= k) ++j;
    return {j, k - (std::size_t{1} << j)};
}

}  // namespace

Eigen::VectorXd haar_coefficients(const BrownianPath& w, Interval interval, int levels) {
    if (levels < 0 || levels > 30) throw std::invalid_argument("levels must be in [0, 30]");
    if (!(interval.hi > interval.lo)) throw std::invalid_argument("empty interval");
    const std::size_t cells = std::size_t{1} << levels;
    const double len = interval.length();

    // w at the dyadic points of resolution 2^-levels
    std::vector<double> dyadic(cells + 1);
    for (std::size_t j = 0; j <= cells; ++j) {
        const double t = j == cells ? interval.hi
                                    : interval.lo + len * (static_cast<double>(j) / static_cast<double>(cells));
        const auto idx = w.grid().index_of(t);
        if (!idx) throw std::invalid_argument("path grid is not dyadic on the interval at the requested level");
        dyadic[j] = w.value(*idx);
    }

    Eigen::VectorXd c(static_cast<Eigen::Index>(cells));
    const double scale = 1.0 / std::sqrt(len);
    c[0] = scale * (dyadic[cells] - dyadic[0]);
    for (std::size_t k = 1; k < cells; ++k) {
        const auto [j, l] = haar_level(k);
        const std::size_t width = cells >> j;  // dyadic cells under the support
        const std::size_t left = l * width;
        const std::size_t mid = left + width / 2;
        const std::size_t right = left + width;
        const double up = dyadic[mid] - dyadic[left];
        const double down = dyadic[right] - dyadic[mid];
        c[static_cast<Eigen::Index>(k)] = scale * std::sqrt(std::ldexp(1.0, j)) * (up - down);
    }
    return c;
}

Eigen::VectorXd haar_coefficients(const BrownianPath& w, const TimeGrid& partition, std::size_t n, int levels) {
    if (n >= partition.steps()) throw std::out_of_range("interval index out of range");
    return haar_coefficients(w, Interval{partition.node(n), partition.node(n + 1)}, levels);
}

double schauder_function(std::size_t k, Interval interval, double t) {
    const double len = interval.length();
    if (t <= interval.lo || t > interval.hi) return 0.0;
    if (t == interval.hi) return k == 0 ? std::sqrt(len) : 0.0;
    const double u = (t - interval.lo) / len;
    if (k == 0) return std::sqrt(len) * u;
    const auto [j, l] = haar_level(k);
    const double width = std::ldexp(1.0, -j);
    const double a = static_cast<double>(l) * width;
    const double s = u - a;
    if (s <= 0.0 || s >= width) return 0.0;
    const double tent = s < 0.5 * width ? s : width - s;
    return std::sqrt(len) * std::sqrt(std::ldexp(1.0, j)) * tent;
}

DiscretePath schauder_reconstruct(const Eigen::VectorXd& coeffs, Interval interval, const GridPtr& grid,
                                  double offset) {
    if (!is_power_of_two(coeffs.size())) throw std::invalid_argument("coefficient count must be a power of two");
    if (!(interval.hi > interval.lo)) throw std::invalid_argument("empty interval");
    Eigen::VectorXd values = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(grid->size()), offset);
    for (std::size_t i = 0; i < grid->size(); ++i) {
        const double t = grid->node(i);
        if (t < interval.lo || t > interval.hi) continue;
        double v = 0.0;
        for (Eigen::Index k = 0; k < coeffs.size(); ++k)
            v += coeffs[k] * schauder_function(static_cast<std::size_t>(k), interval, t);
        values[static_cast<Eigen::Index>(i)] += v;
    }
    return DiscretePath(grid, values, Interpolation::Linear);
}

}  // namespace wpl
