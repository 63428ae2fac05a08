#include "weakpathlab/functional_calculus.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "weakpathlab/errors.hpp"
#include "weakpathlab/schemes.hpp"

namespace wpl {

namespace {

constexpr std::uint64_t kOuterTag = 1;
constexpr std::uint64_t kInnerTag = 2;

// Scratch space for one worker: simulates x_t (+) X^{t,x} and evaluates f^eps.
class Continuer {
public:
    explicit Continuer(const NestedSetup& s)
        : s_(s), n_(s.grid->size()), path_(n_), smooth_(n_), dir_(n_), smooth_dir_(n_) {}

    // Nodes below k copied from head, nodes k..hold set to x, Euler from hold on.
    double run(std::span<const double> head, std::size_t k, double x, std::size_t hold,
               std::span<const double> inc) {
        std::copy(head.begin(), head.begin() + static_cast<std::ptrdiff_t>(k), path_.begin());
        for (std::size_t j = k; j < hold; ++j) path_[j] = x;
        euler_continue(s_.model, *s_.grid, inc, hold, x, path_);
        return evaluate(path_);
    }

    double evaluate(std::span<const double> path) {
        s_.mollifier->apply(path, smooth_);
        return s_.f.eval(view(smooth_));
    }

    // Df^eps along the last run (which must have hold == k) in the direction 1_[t,T] Z.
    double pathwise(std::size_t k, std::span<const double> inc) {
        kernels::first_variation(s_.model, path_, inc, *s_.grid, k, dir_);
        s_.mollifier->apply(dir_, smooth_dir_);
        return s_.f.d1(view(smooth_), view(smooth_dir_));
    }

    std::span<double> path() { return path_; }

private:
    PathView view(const std::vector<double>& v) const {
        return PathView{s_.grid.get(), std::span<const double>(v), Interpolation::Linear};
    }

    const NestedSetup& s_;
    std::size_t n_;
    std::vector<double> path_, smooth_, dir_, smooth_dir_;
};

// Node index of the prefix end; the prefix grid must be a head of the setup grid.
std::size_t prefix_end(const NestedSetup& s, const DiscretePath& p) {
    if (p.dimension() != 1) throw std::invalid_argument("nested estimators need scalar paths");
    const TimeGrid& g = *s.grid;
    if (p.size() > g.size()) throw std::invalid_argument("prefix is longer than the simulation grid");
    for (std::size_t k = 0; k < p.size(); ++k)
        if (p.grid().node(k) != g.node(k)) throw std::invalid_argument("prefix grid is not a head of the simulation grid");
    return p.size() - 1;
}

std::size_t node_index(const TimeGrid& g, double t, const char* what) {
    const auto k = g.index_of(t);
    if (!k) throw std::invalid_argument(std::string(what) + " is not a node of the simulation grid");
    return *k;
}

NestedEstimate make_estimate(double value, double se, std::size_t n, const NestedSetup& s, const SeedSpec& seed) {
    return NestedEstimate{value, se, n, s.epsilon(), s.grid->steps(), seed};
}

void require_inner(std::size_t n) {
    if (n == 0) throw std::invalid_argument("inner sample count must be positive");
}

// Fine Euler from xi0 over slots [0, count) with forward increments of `key`.
void outer_path(const NestedSetup& s, const SeedSpec& key, std::size_t count, std::vector<double>& inc,
                std::span<double> out) {
    StreamEngine e(key);
    const TimeGrid& g = *s.grid;
    for (std::size_t k = 0; k < count; ++k) inc[k] = std::sqrt(g.step(k)) * standard_normal(e);
    const std::size_t n = g.size();
    out[0] = s.model.xi0;
    double y = s.model.xi0;
    for (std::size_t k = 0; k < count && k + 1 < n; ++k) {
        y = y + s.model.drift(y) * g.step(k) + s.model.diffusion(y) * inc[k];
        if (!std::isfinite(y)) throw NumericalOverflow("non-finite outer path", k + 1);
        out[k + 1] = y;
    }
}

using Moments4 = MomentAccumulator<double, 4>;
using Moments5 = MomentAccumulator<double, 5>;

// One inner sample of the Kolmogorov residual: (r, D, b V1, c sigma^2 V2).
Eigen::Vector4d kolmogorov_sample(const NestedSetup& s, Continuer& c, std::span<const double> head, std::size_t k,
                                  double x, std::size_t m, double h, double half, std::vector<double>& inc,
                                  std::vector<double>& anti, const SeedSpec& inner) {
    const TimeGrid& g = *s.grid;
    sample_increments_backward(g, inner, k, inc);
    const double up = c.run(head, k, x + h, k, inc);
    const double down = c.run(head, k, x - h, k, inc);
    const double base = c.run(head, k, x, k, inc);
    std::copy(inc.begin(), inc.end(), anti.begin());
    for (std::size_t j = k; j < k + m; ++j) anti[j] = -anti[j];
    const double mirror = c.run(head, k, x, k, anti);
    const double ext = c.run(head, k, x, k + m, inc);
    const double dt = g.node(k + m) - g.node(k);
    const double d = (ext - 0.5 * (base + mirror)) / dt;
    const double v1 = (up - down) / (2.0 * h);
    const double v2 = (up - 2.0 * base + down) / (h * h);
    const double bt = s.model.drift(x) * v1;
    const double sg = s.model.diffusion(x);
    const double st = half * sg * sg * v2;
    return {d + bt + st, d, bt, st};
}

void check_kolmogorov_prefix(const NestedSetup& s, const DiscretePath& prefix, std::size_t k, std::size_t steps) {
    if (prefix.mode() != Interpolation::Linear) throw std::invalid_argument("Kolmogorov check needs a continuous prefix");
    if (prefix.value(0) != s.model.xi0) throw std::invalid_argument("Kolmogorov check needs a prefix started at xi0");
    if (steps == 0) throw std::invalid_argument("horizontal step count must be positive");
    if (k + steps >= s.grid->size()) throw std::invalid_argument("t + h must not exceed T");
}

ResidualReport finish_kolmogorov(double r, double se, double d, double bt, double st, double scale, double dt,
                                 double half) {
    ResidualReport out;
    out.residual = r;
    out.std_error = se;
    const double allowance = kKolmogorovBiasFactor * dt * scale;
    out.tolerance = 4.0 * se + allowance;
    out.passed = std::abs(r) <= out.tolerance;
    out.components = {{"horizontal", d}, {"drift_term", bt},        {"diffusion_term", st},
                      {"scale", scale},  {"allowance", allowance}, {"h_step", dt},
                      {"half_factor", half}};
    return out;
}

}  // namespace

NestedSetup make_nested_setup(SdeModel model, PathFunctional f, GridPtr fine, double epsilon, int kernel_samples) {
    if (!fine || fine->size() < 2) throw std::invalid_argument("nested setup needs a fine grid with steps");
    const double eps = epsilon > 0.0 ? epsilon : 2.0 * fine->mesh();
    auto op = std::make_shared<const MollifierOperator>(MollifierSpec{eps, kernel_samples}, fine, Interpolation::Linear);
    return NestedSetup{std::move(model), std::move(f), std::move(fine), std::move(op)};
}

SeedSpec nested_key(const SeedSpec& master, std::uint64_t outer, std::uint64_t tag) {
    return substream(substream(master, outer), tag);
}

double default_bump(double x) { return 1e-2 * (1.0 + std::abs(x)); }

NestedEstimate estimate_F(const NestedSetup& setup, const DiscretePath& prefix, std::size_t n_inner,
                          const SeedSpec& seed, const Executor& exec) {
    require_inner(n_inner);
    const std::size_t k = prefix_end(setup, prefix);
    const Eigen::VectorXd pv = prefix.scalar_values();
    const std::span<const double> head(pv.data(), static_cast<std::size_t>(pv.size()));
    const auto acc = parallel_accumulate_blocks<ScalarMoments>(exec, n_inner, [&](std::size_t b, std::size_t e,
                                                                                ScalarMoments& m) {
        Continuer c(setup);
        std::vector<double> inc(setup.grid->steps());
        for (std::size_t i = b; i < e; ++i) {
            sample_increments_backward(*setup.grid, substream(seed, i), k, inc);
            m.add(Eigen::Matrix<double, 1, 1>(c.run(head, k, pv[static_cast<Eigen::Index>(k)], k, inc)));
        }
    });
    return make_estimate(acc.mean()[0], acc.std_error()[0], n_inner, setup, seed);
}

VerticalDerivative vertical_derivative(const NestedSetup& setup, const DiscretePath& prefix, std::size_t n_inner,
                                       double bump, const SeedSpec& seed, const Executor& exec) {
    require_inner(n_inner);
    const std::size_t k = prefix_end(setup, prefix);
    const Eigen::VectorXd pv = prefix.scalar_values();
    const std::span<const double> head(pv.data(), static_cast<std::size_t>(pv.size()));
    const double x = pv[static_cast<Eigen::Index>(k)];
    const double h = bump > 0.0 ? bump : default_bump(x);
    using Moments3 = MomentAccumulator<double, 3>;
    const auto acc = parallel_accumulate_blocks<Moments3>(exec, n_inner, [&](std::size_t b, std::size_t e, Moments3& m) {
        Continuer c(setup);
        std::vector<double> inc(setup.grid->steps());
        for (std::size_t i = b; i < e; ++i) {
            sample_increments_backward(*setup.grid, substream(seed, i), k, inc);
            const double up = c.run(head, k, x + h, k, inc);
            const double down = c.run(head, k, x - h, k, inc);
            c.run(head, k, x, k, inc);
            const double path = c.pathwise(k, inc);
            const double fd = (up - down) / (2.0 * h);
            m.add(Eigen::Vector3d(fd, path, fd - path));
        }
    });
    VerticalDerivative out;
    out.h = h;
    out.bump = make_estimate(acc.mean()[0], acc.std_error()[0], n_inner, setup, seed);
    out.pathwise = make_estimate(acc.mean()[1], acc.std_error()[1], n_inner, setup, seed);
    out.difference = acc.mean()[2];
    out.difference_se = acc.std_error()[2];
    out.tolerance = 4.0 * out.difference_se + h * h * (1.0 + std::abs(out.bump.value));
    out.agree = std::abs(out.difference) <= out.tolerance;
    return out;
}

NestedEstimate second_vertical_derivative(const NestedSetup& setup, const DiscretePath& prefix, std::size_t n_inner,
                                          double bump, const SeedSpec& seed, const Executor& exec) {
    require_inner(n_inner);
    const std::size_t k = prefix_end(setup, prefix);
    const Eigen::VectorXd pv = prefix.scalar_values();
    const std::span<const double> head(pv.data(), static_cast<std::size_t>(pv.size()));
    const double x = pv[static_cast<Eigen::Index>(k)];
    const double h = bump > 0.0 ? bump : default_bump(x);
    const auto acc = parallel_accumulate_blocks<ScalarMoments>(exec, n_inner, [&](std::size_t b, std::size_t e,
                                                                                ScalarMoments& m) {
        Continuer c(setup);
        std::vector<double> inc(setup.grid->steps());
        for (std::size_t i = b; i < e; ++i) {
            sample_increments_backward(*setup.grid, substream(seed, i), k, inc);
            const double up = c.run(head, k, x + h, k, inc);
            const double mid = c.run(head, k, x, k, inc);
            const double down = c.run(head, k, x - h, k, inc);
            m.add(Eigen::Matrix<double, 1, 1>((up - 2.0 * mid + down) / (h * h)));
        }
    });
    return make_estimate(acc.mean()[0], acc.std_error()[0], n_inner, setup, seed);
}

NestedEstimate horizontal_derivative(const NestedSetup& setup, const DiscretePath& prefix, std::size_t n_inner,
                                     double h_step, const SeedSpec& seed, const Executor& exec) {
    require_inner(n_inner);
    if (!(h_step > 0.0)) throw std::invalid_argument("horizontal step must be positive");
    const std::size_t k = prefix_end(setup, prefix);
    const TimeGrid& g = *setup.grid;
    const double t = g.node(k);
    if (t + h_step > g.horizon()) throw std::invalid_argument("t + h must not exceed T");
    const std::size_t end = node_index(g, t + h_step, "t + h");
    const std::size_t m = end - k;
    const Eigen::VectorXd pv = prefix.scalar_values();
    const std::span<const double> head(pv.data(), static_cast<std::size_t>(pv.size()));
    const double x = pv[static_cast<Eigen::Index>(k)];
    const double dt = g.node(end) - t;
    const auto acc = parallel_accumulate_blocks<ScalarMoments>(exec, n_inner, [&](std::size_t b, std::size_t e,
                                                                                ScalarMoments& acc_) {
        Continuer c(setup);
        std::vector<double> inc(g.steps()), anti(g.steps());
        for (std::size_t i = b; i < e; ++i) {
            sample_increments_backward(g, substream(seed, i), k, inc);
            std::copy(inc.begin(), inc.end(), anti.begin());
            for (std::size_t j = k; j < k + m; ++j) anti[j] = -anti[j];
            const double base = c.run(head, k, x, k, inc);
            const double mirror = c.run(head, k, x, k, anti);
            const double ext = c.run(head, k, x, end, inc);
            acc_.add(Eigen::Matrix<double, 1, 1>((ext - 0.5 * (base + mirror)) / dt));
        }
    });
    return make_estimate(acc.mean()[0], acc.std_error()[0], n_inner, setup, seed);
}

ResidualReport kolmogorov_residual(const NestedSetup& setup, const DiscretePath& prefix, std::size_t n_inner,
                                   std::size_t steps, const SeedSpec& seed, KolmogorovFault fault,
                                   const Executor& exec) {
    require_inner(n_inner);
    const std::size_t k = prefix_end(setup, prefix);
    check_kolmogorov_prefix(setup, prefix, k, steps);
    const double half = fault == KolmogorovFault::DropHalfFactor ? 1.0 : 0.5;
    const Eigen::VectorXd pv = prefix.scalar_values();
    const std::span<const double> head(pv.data(), static_cast<std::size_t>(pv.size()));
    const double x = pv[static_cast<Eigen::Index>(k)];
    const double h = default_bump(x);
    const auto acc = parallel_accumulate_blocks<Moments4>(exec, n_inner, [&](std::size_t b, std::size_t e, Moments4& m) {
        Continuer c(setup);
        std::vector<double> inc(setup.grid->steps()), anti(setup.grid->steps());
        for (std::size_t i = b; i < e; ++i)
            m.add(kolmogorov_sample(setup, c, head, k, x, steps, h, half, inc, anti, substream(seed, i)));
    });
    const auto& mu = acc.mean();
    // With the fault the diffusion column carries sigma^2 V2; the scale keeps the 1/2.
    const double scale = std::abs(mu[1]) + std::abs(mu[2]) + 0.5 / half * std::abs(mu[3]);
    return finish_kolmogorov(mu[0], acc.std_error()[0], mu[1], mu[2], mu[3], scale,
                             setup.grid->node(k + steps) - setup.grid->node(k), half);
}

ResidualReport kolmogorov_check(const NestedSetup& setup, double t, std::size_t n_outer, std::size_t n_inner,
                                std::size_t steps, const SeedSpec& seed, KolmogorovFault fault,
                                const Executor& exec) {
    require_inner(n_inner);
    if (n_outer < 2) throw std::invalid_argument("pooled check needs at least two outer samples");
    const TimeGrid& g = *setup.grid;
    const std::size_t k = node_index(g, t, "check time");
    if (steps == 0) throw std::invalid_argument("horizontal step count must be positive");
    if (k + steps >= g.size()) throw std::invalid_argument("t + h must not exceed T");
    const double half = fault == KolmogorovFault::DropHalfFactor ? 1.0 : 0.5;
    const auto acc = parallel_accumulate_blocks<Moments5>(exec, n_outer, [&](std::size_t b, std::size_t e, Moments5& m) {
        Continuer c(setup);
        std::vector<double> inc(g.steps()), anti(g.steps()), outer_inc(g.steps()), prefix(g.size());
        for (std::size_t o = b; o < e; ++o) {
            outer_path(setup, nested_key(seed, o, kOuterTag), k, outer_inc, prefix);
            const double x = prefix[k];
            const double h = default_bump(x);
            const SeedSpec inner = nested_key(seed, o, kInnerTag);
            Moments4 local;
            for (std::size_t i = 0; i < n_inner; ++i)
                local.add(kolmogorov_sample(setup, c, prefix, k, x, steps, h, half, inc, anti, substream(inner, i)));
            const auto& mu = local.mean();
            const double scale = std::abs(mu[1]) + std::abs(mu[2]) + 0.5 / half * std::abs(mu[3]);
            Eigen::Matrix<double, 5, 1> row;
            row << mu[0], mu[1], mu[2], mu[3], scale;
            m.add(row);
        }
    });
    const auto& mu = acc.mean();
    auto out = finish_kolmogorov(mu[0], acc.std_error()[0], mu[1], mu[2], mu[3], mu[4], g.node(k + steps) - g.node(k),
                                 half);
    out.components["n_outer"] = static_cast<double>(n_outer);
    out.components["n_inner"] = static_cast<double>(n_inner);
    return out;
}

ResidualReport martingale_gap(const NestedSetup& setup, double s, double t, std::size_t n_outer, std::size_t n_inner,
                              const SeedSpec& seed, const Executor& exec) {
    require_inner(n_inner);
    if (n_outer < 2) throw std::invalid_argument("martingale gap needs at least two outer samples");
    if (!(s >= 0.0 && s <= t)) throw std::invalid_argument("martingale gap needs 0 <= s <= t");
    const TimeGrid& g = *setup.grid;
    const std::size_t ks = node_index(g, s, "s");
    const std::size_t kt = node_index(g, t, "t");
    using Moments3 = MomentAccumulator<double, 3>;
    const auto acc = parallel_accumulate_blocks<Moments3>(exec, n_outer, [&](std::size_t b, std::size_t e, Moments3& m) {
        Continuer c(setup);
        std::vector<double> inc(g.steps()), outer_inc(g.steps()), x(g.size());
        for (std::size_t o = b; o < e; ++o) {
            outer_path(setup, nested_key(seed, o, kOuterTag), kt, outer_inc, x);
            const SeedSpec inner = nested_key(seed, o, kInnerTag);
            double fs = 0.0, ft = 0.0;
            for (std::size_t i = 0; i < n_inner; ++i) {
                const SeedSpec key = substream(inner, i);
                sample_increments_backward(g, key, ks, inc);
                fs += c.run(x, ks, x[ks], ks, inc);
                if (kt != ks) {
                    sample_increments_backward(g, key, kt, inc);
                    ft += c.run(x, kt, x[kt], kt, inc);
                }
            }
            fs /= static_cast<double>(n_inner);
            ft = kt == ks ? fs : ft / static_cast<double>(n_inner);
            m.add(Eigen::Vector3d(ft - fs, fs, ft));
        }
    });
    ResidualReport out;
    out.residual = acc.mean()[0];
    out.std_error = acc.std_error()[0];
    out.tolerance = 4.0 * out.std_error;
    out.passed = std::abs(out.residual) <= out.tolerance;
    out.components = {{"F_s", acc.mean()[1]},
                      {"F_t", acc.mean()[2]},
                      {"n_outer", static_cast<double>(n_outer)},
                      {"n_inner", static_cast<double>(n_inner)}};
    return out;
}

namespace {

double ito_sum(std::span<const double> w, const TimeGrid& g, std::size_t stride, QvMode mode, double* scale) {
    const std::size_t n = (w.size() - 1) / stride;
    double stoch = 0.0, qv = 0.0, mag = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double a = w[j * stride], b = w[(j + 1) * stride];
        const double dw = b - a;
        stoch += 2.0 * a * dw;
        qv += mode == QvMode::Realized ? dw * dw : g.node((j + 1) * stride) - g.node(j * stride);
        mag += std::abs(2.0 * a * dw) + dw * dw;
    }
    const double wt = w[n * stride], w0 = w[0];
    if (scale) *scale = mag + wt * wt;
    return wt * wt - w0 * w0 - stoch - qv;
}

}  // namespace

ResidualReport ito_residual(const BrownianPath& w, QvMode mode) {
    const Eigen::VectorXd v = w.path().scalar_values();
    const std::span<const double> values(v.data(), static_cast<std::size_t>(v.size()));
    double scale = 0.0;
    ResidualReport out;
    out.residual = ito_sum(values, w.grid(), 1, mode, &scale);
    if (mode == QvMode::Realized) {
        out.tolerance = 64.0 * std::numeric_limits<double>::epsilon() * scale;
    } else {
        double s2 = 0.0;
        for (std::size_t k = 0; k < w.grid().steps(); ++k) s2 += w.grid().step(k) * w.grid().step(k);
        out.tolerance = 4.0 * std::sqrt(2.0 * s2);
    }
    out.passed = std::abs(out.residual) <= out.tolerance;
    out.components = {{"F_T", v[v.size() - 1] * v[v.size() - 1]}, {"F_0", v[0] * v[0]}};
    return out;
}

namespace {

struct SquareSums {
    std::vector<double> sum;
    void merge(const SquareSums& o) {
        if (sum.empty()) {
            sum = o.sum;
            return;
        }
        for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += o.sum[i];
    }
};

}  // namespace

ItoCheck ito_check(double horizon, std::size_t base_steps, int halvings, std::size_t n_samples, const SeedSpec& seed,
                   QvMode mode, const Executor& exec) {
    if (base_steps == 0 || halvings < 1 || halvings > 20) throw std::invalid_argument("invalid Ito check ladder");
    if (n_samples < 2) throw std::invalid_argument("Ito check needs at least two samples");
    const std::size_t levels = static_cast<std::size_t>(halvings) + 1;
    const std::size_t finest = base_steps << halvings;
    const TimeGrid g = make_uniform_grid(horizon, static_cast<long>(finest));
    const auto sums = parallel_accumulate_blocks<SquareSums>(exec, n_samples, [&](std::size_t b, std::size_t e,
                                                                               SquareSums& acc) {
        acc.sum.assign(levels, 0.0);
        std::vector<double> inc(finest), w(finest + 1);
        for (std::size_t i = b; i < e; ++i) {
            sample_increments(g, substream(seed, i), inc);
            w[0] = 0.0;
            for (std::size_t k = 0; k < finest; ++k) w[k + 1] = w[k] + inc[k];
            for (std::size_t l = 0; l < levels; ++l) {
                const std::size_t stride = std::size_t{1} << (levels - 1 - l);
                const double r = ito_sum(w, g, stride, mode, nullptr);
                acc.sum[l] += r * r;
            }
        }
    });
    ItoCheck out;
    out.passed = true;
    for (std::size_t l = 0; l < levels; ++l) {
        out.mesh.push_back(horizon / static_cast<double>(base_steps << l));
        out.rms.push_back(std::sqrt(sums.sum[l] / static_cast<double>(n_samples)));
    }
    for (std::size_t l = 0; l + 1 < levels; ++l) {
        const double r = out.rms[l] / out.rms[l + 1];
        out.ratio.push_back(r);
        if (!(r >= out.ratio_lo && r <= out.ratio_hi)) out.passed = false;
    }
    return out;
}

ErrorRepresentation error_representation_sides(const SdeModel& model, const PathFunctional& f,
                                               const ErrorRepresentationSpec& spec, const Executor& exec) {
    if (!(spec.horizon > 0.0) || spec.horizon > 0.5) throw std::invalid_argument("error representation needs 0 < T <= 0.5");
    if (spec.coarse_steps < 1 || spec.coarse_steps > 4) throw std::invalid_argument("error representation needs 1..4 coarse steps");
    if (spec.refinement < 1) throw std::invalid_argument("refinement factor must be positive");
    if (spec.n_outer < 2) throw std::invalid_argument("error representation needs at least two outer samples");
    require_inner(spec.n_inner);
    const std::size_t q = spec.quadrature_per_step == 0 ? spec.refinement : spec.quadrature_per_step;
    if (q > spec.refinement || spec.refinement % q != 0)
        throw std::invalid_argument("quadrature points per step must divide the refinement factor");

    const bool constant_diffusion = model.affine && model.affine->diffusion1 == 0.0;
    const double per_point = constant_diffusion ? 2.0 : 3.0;
    const double projected = static_cast<double>(spec.n_outer) * static_cast<double>(spec.coarse_steps) *
                             static_cast<double>(q) * static_cast<double>(spec.n_inner) * per_point;
    if (projected > spec.budget_cap)
        throw BudgetExceeded("projected " + std::to_string(projected) + " continuations exceed the cap " +
                             std::to_string(spec.budget_cap));

    const TimeGrid coarse = make_uniform_grid(spec.horizon, static_cast<long>(spec.coarse_steps));
    auto fine = std::make_shared<const TimeGrid>(coarse.refine(spec.refinement));
    const NestedSetup setup = make_nested_setup(model, f, fine, spec.epsilon, spec.kernel_samples);
    const std::size_t r = spec.refinement;
    const std::size_t stride = r / q;
    const std::size_t nf = fine->steps();

    using Moments3 = MomentAccumulator<double, 3>;
    const auto acc = parallel_accumulate_blocks<Moments3>(exec, spec.n_outer, [&](std::size_t b, std::size_t e,
                                                                               Moments3& m) {
        Continuer c(setup);
        std::vector<double> inc(nf), inner_inc(nf), xt(nf + 1), x(nf + 1);
        for (std::size_t o = b; o < e; ++o) {
            StreamEngine eng(nested_key(spec.seed, o, kOuterTag));
            for (std::size_t k = 0; k < nf; ++k) inc[k] = std::sqrt(fine->step(k)) * standard_normal(eng);

            // Reference X: fine Euler. X~: coarse Euler nodes continued with frozen coefficients.
            euler_continue(model, *fine, inc, 0, model.xi0, x);
            std::vector<double> b_frozen(spec.coarse_steps), s_frozen(spec.coarse_steps);
            double y = model.xi0;
            xt[0] = y;
            for (std::size_t n = 0; n < spec.coarse_steps; ++n) {
                const std::size_t lo = n * r;
                const double bn = model.drift(y), sn = model.diffusion(y);
                b_frozen[n] = bn;
                s_frozen[n] = sn;
                double dw = 0.0;
                for (std::size_t j = lo; j < lo + r; ++j) {
                    dw += inc[j];
                    xt[j + 1] = y + bn * (fine->node(j + 1) - fine->node(lo)) + sn * dw;
                }
                y = y + bn * coarse.step(n) + sn * dw;
                if (!std::isfinite(y)) throw NumericalOverflow("non-finite coarse Euler value", n + 1);
                xt[lo + r] = y;
            }
            const double lhs = c.evaluate(xt) - c.evaluate(x);

            double rhs = 0.0;
            const SeedSpec inner = nested_key(spec.seed, o, kInnerTag);
            for (std::size_t n = 0; n < spec.coarse_steps; ++n) {
                const std::size_t lo = n * r;
                for (std::size_t p = 1; p <= q; ++p) {
                    const std::size_t j = lo + p * stride;
                    const double ref = xt[j - 1];
                    const double cb = b_frozen[n] - model.drift(ref);
                    const double sr = model.diffusion(ref);
                    const double cs = s_frozen[n] * s_frozen[n] - sr * sr;
                    if (cb == 0.0 && cs == 0.0) continue;
                    const double xj = xt[j];
                    const double h = spec.bump > 0.0 ? spec.bump : default_bump(xj);
                    const SeedSpec point = substream(inner, n * (q + 1) + p);
                    double grad = 0.0, hess = 0.0;
                    for (std::size_t i = 0; i < spec.n_inner; ++i) {
                        sample_increments_backward(*fine, substream(point, i), j, inner_inc);
                        const double up = c.run(xt, j, xj + h, j, inner_inc);
                        const double down = c.run(xt, j, xj - h, j, inner_inc);
                        grad += (up - down) / (2.0 * h);
                        if (cs != 0.0) hess += (up - 2.0 * c.run(xt, j, xj, j, inner_inc) + down) / (h * h);
                    }
                    grad /= static_cast<double>(spec.n_inner);
                    hess /= static_cast<double>(spec.n_inner);
                    const double integrand = grad * cb + 0.5 * hess * cs;
                    rhs += (fine->node(j) - fine->node(j - stride)) * integrand;
                }
            }
            m.add(Eigen::Vector3d(lhs, rhs, lhs - rhs));
        }
    });

    ErrorRepresentation out;
    out.lhs = make_estimate(acc.mean()[0], acc.std_error()[0], spec.n_inner, setup, spec.seed);
    out.rhs = make_estimate(acc.mean()[1], acc.std_error()[1], spec.n_inner, setup, spec.seed);
    out.difference = acc.mean()[2];
    out.difference_se = acc.std_error()[2];
    // For affine dynamics with linear f both sides agree pathwise; the floor covers rounding.
    out.tolerance = 4.0 * out.difference_se + 1e-12 * (1.0 + std::abs(out.lhs.value) + std::abs(out.rhs.value));
    out.passed = std::abs(out.difference) <= out.tolerance;
    out.projected_continuations = projected;
    return out;
}

}  // namespace wpl
