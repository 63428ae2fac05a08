#include "weakpathlab/random.hpp"

#include <array>
#include <cmath>
#include <deque>
#include <stdexcept>

namespace wpl {

StreamEngine::StreamEngine(const SeedSpec& seed) noexcept {
    std::uint64_t state = stream_key(seed);
    for (auto& word : s_) {
        word = mix64(state);
        state += 0x9e3779b97f4a7c15ULL;
    }
}

namespace {

// Doornik's ZIGNOR layout: 128 layers of equal area V, right tail beyond R.
struct ZigguratTables {
    static constexpr int layers = 128;
    static constexpr double r = 3.442619855899;
    static constexpr double v = 9.91256303526217e-3;

    std::array<double, layers + 1> x{};
    std::array<double, layers> ratio{};

    ZigguratTables() {
        double f = std::exp(-0.5 * r * r);
        x[0] = v / f;
        x[1] = r;
        x[layers] = 0.0;
        for (int i = 2; i < layers; ++i) {
            x[i] = std::sqrt(-2.0 * std::log(v / x[i - 1] + f));
            f = std::exp(-0.5 * x[i] * x[i]);
        }
        for (int i = 0; i < layers; ++i) ratio[i] = x[i + 1] / x[i];
    }
};

const ZigguratTables& tables() {
    static const ZigguratTables t;
    return t;
}

double normal_tail(StreamEngine& engine, bool negative) noexcept {
    constexpr double r = ZigguratTables::r;
    double x = 0.0;
    double y = 0.0;
    do {
        x = std::log(engine.uniform_open()) / r;
        y = std::log(engine.uniform_open());
    } while (-2.0 * y < x * x);
    return negative ? x - r : r - x;
}

}  // namespace

double standard_normal(StreamEngine& engine) noexcept {
    const ZigguratTables& t = tables();
    for (;;) {
        const std::uint64_t bits = engine();
        // High 53 bits give u in (-1, 1); the low 7 bits pick the layer.
        const double u = 2.0 * ((static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53) - 1.0;
        const int i = static_cast<int>(bits & 0x7f);
        if (std::abs(u) < t.ratio[i]) return u * t.x[i];
        if (i == 0) return normal_tail(engine, u < 0.0);
        const double x = u * t.x[i];
        const double f0 = std::exp(-0.5 * (t.x[i] * t.x[i] - x * x));
        const double f1 = std::exp(-0.5 * (t.x[i + 1] * t.x[i + 1] - x * x));
        if (f1 + engine.uniform_open() * (f0 - f1) < 1.0) return x;
    }
}

void fill_standard_normal(StreamEngine& engine, std::span<double> out) noexcept {
    for (double& z : out) z = standard_normal(engine);
}

void sample_increments(const TimeGrid& grid, const SeedSpec& seed, std::span<double> out) {
    if (out.size() != grid.steps()) throw std::invalid_argument("increment buffer size must equal the step count");
    StreamEngine engine(seed);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::sqrt(grid.step(k)) * standard_normal(engine);
}

void sample_increments_backward(const TimeGrid& grid, const SeedSpec& seed, std::size_t first,
                                std::span<double> out) {
    if (out.size() != grid.steps()) throw std::invalid_argument("increment buffer size must equal the step count");
    StreamEngine engine(seed);
    for (std::size_t k = out.size(); k-- > first;) out[k] = std::sqrt(grid.step(k)) * standard_normal(engine);
}

BrownianPath::BrownianPath(DiscretePath path) : path_(std::move(path)) {
    if (path_.dimension() != 1) throw std::invalid_argument("Brownian path must be scalar");
    if (path_.mode() != Interpolation::Linear) throw std::invalid_argument("Brownian path must be in linear mode");
    if (path_.value(0) != 0.0) throw std::invalid_argument("Brownian path must start at 0");
}

Eigen::VectorXd BrownianPath::increments() const {
    const Eigen::VectorXd v = path_.scalar_values();
    return v.tail(v.size() - 1) - v.head(v.size() - 1);
}

BrownianPath brownian_from_increments(GridPtr grid, std::span<const double> increments) {
    if (increments.size() != grid->steps()) throw std::invalid_argument("increment count must equal the step count");
    Eigen::VectorXd w(static_cast<Eigen::Index>(grid->size()));
    w[0] = 0.0;
    for (std::size_t k = 0; k < increments.size(); ++k)
        w[static_cast<Eigen::Index>(k + 1)] = w[static_cast<Eigen::Index>(k)] + increments[k];
    return BrownianPath(DiscretePath(std::move(grid), w, Interpolation::Linear));
}

BrownianPath sample_brownian(GridPtr grid, const SeedSpec& seed) {
    std::vector<double> inc(grid->steps());
    sample_increments(*grid, seed, inc);
    return brownian_from_increments(std::move(grid), inc);
}

BrownianPath refine_brownian(const BrownianPath& w, GridPtr fine, const SeedSpec& seed) {
    const TimeGrid& coarse = w.grid();
    if (!fine->nests(coarse)) throw std::invalid_argument("fine grid does not contain the coarse nodes");

    Eigen::VectorXd values(static_cast<Eigen::Index>(fine->size()));
    std::deque<std::pair<std::size_t, std::size_t>> pending;
    std::size_t previous = 0;
    for (std::size_t k = 0; k < coarse.size(); ++k) {
        const std::size_t idx = *fine->index_of(coarse.node(k));
        values[static_cast<Eigen::Index>(idx)] = w.value(k);
        if (k > 0) pending.emplace_back(previous, idx);
        previous = idx;
    }

    StreamEngine engine(seed);
    while (!pending.empty()) {
        const auto [lo, hi] = pending.front();
        pending.pop_front();
        if (hi - lo < 2) continue;
        const std::size_t mid = lo + (hi - lo) / 2;
        const double ta = fine->node(lo);
        const double tb = fine->node(hi);
        const double tm = fine->node(mid);
        const double wa = values[static_cast<Eigen::Index>(lo)];
        const double wb = values[static_cast<Eigen::Index>(hi)];
        const double mean = wa + (tm - ta) / (tb - ta) * (wb - wa);
        const double var = (tm - ta) * (tb - tm) / (tb - ta);
        values[static_cast<Eigen::Index>(mid)] = mean + std::sqrt(var) * standard_normal(engine);
        pending.emplace_back(lo, mid);
        pending.emplace_back(mid, hi);
    }
    return BrownianPath(DiscretePath(std::move(fine), values, Interpolation::Linear));
}

}  // namespace wpl
