#include "weakpathlab/weak_error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "weakpathlab/errors.hpp"

namespace wpl {

std::string to_string(ReferenceSpec::Kind kind) {
    return kind == ReferenceSpec::Kind::ClosedForm ? "closed_form" : "fine_grid";
}

std::vector<double> default_ladder() { return {0.25, 0.125, 0.0625, 0.03125, 0.015625}; }

std::vector<std::size_t> delta_squared_rule(const std::vector<double>& ladder, std::size_t n_coarsest) {
    std::vector<std::size_t> n;
    for (double d : ladder) n.push_back(static_cast<std::size_t>(std::llround(n_coarsest * std::pow(ladder.front() / d, 2))));
    return n;
}

namespace {

std::size_t steps_for(double horizon, double delta) {
    const double r = horizon / delta;
    const double n = std::round(r);
    if (n < 1.0 || std::abs(r - n) > 1e-9 * r) throw std::invalid_argument("horizon is not a multiple of the mesh");
    return static_cast<std::size_t>(n);
}

// E f(X) for OU and point / product functionals.
std::optional<double> closed_form(const SdeModel& m, const PathFunctional& f) {
    if (!m.ou) return std::nullopt;
    if (f.kind == "point") {
        const double t = f.params.at("t");
        return ou_exact_moments(*m.ou, t, t).mean1;
    }
    if (f.kind == "product") {
        const auto mo = ou_exact_moments(*m.ou, f.params.at("t1"), f.params.at("t2"));
        return mo.cov + mo.mean1 * mo.mean2;
    }
    return std::nullopt;
}

double reference_mesh(const RateExperiment& e) {
    return e.ladder.back() / static_cast<double>(e.reference.factor);
}

struct BiasAcc {
    ScalarMoments m;
    std::size_t excluded = 0;
    void merge(const BiasAcc& o) {
        m.merge(o.m);
        excluded += o.excluded;
    }
};

inline double euler_step(const SdeModel& m, double y, double dt, double dw) {
    return y + m.drift(y) * dt + m.diffusion(y) * dw;
}

}  // namespace

void validate(const RateExperiment& e) {
    if (!(e.horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
    if (e.ladder.size() < 3) throw std::invalid_argument("the mesh ladder needs at least three rungs");
    if (e.n_samples.size() != e.ladder.size()) throw std::invalid_argument("one sample count per rung is required");
    for (std::size_t i = 0; i < e.ladder.size(); ++i) {
        if (!(e.ladder[i] > 0.0)) throw std::invalid_argument("meshes must be positive");
        if (i > 0 && !(e.ladder[i] < e.ladder[i - 1])) throw std::invalid_argument("the mesh ladder must strictly decrease");
        steps_for(e.horizon, e.ladder[i]);
        if (e.n_samples[i] < 2) throw std::invalid_argument("each rung needs at least two samples");
    }
    if (e.reference.kind == ReferenceSpec::Kind::ClosedForm) {
        if (!closed_form(e.model, e.f)) throw std::invalid_argument("closed-form reference needs OU with a point or product functional");
        if (e.epsilon > 0.0) throw std::invalid_argument("mollified functionals need the fine-grid reference");
    } else {
        if (e.reference.factor < 1) throw std::invalid_argument("reference factor must be positive");
        const double ref = reference_mesh(e);
        for (double d : e.ladder) steps_for(d, ref);
    }
}

RungResult coupled_bias(const RateExperiment& e, std::size_t rung, const Executor& exec) {
    validate(e);
    if (rung >= e.ladder.size()) throw std::out_of_range("rung index out of range");
    const double delta = e.ladder[rung];
    const std::size_t n = steps_for(e.horizon, delta);
    auto coarse = make_uniform_grid_ptr(e.horizon, static_cast<long>(n));
    const SeedSpec key = substream(e.seed, rung);
    const std::size_t count = e.n_samples[rung];
    BiasAcc acc;

    if (e.reference.kind == ReferenceSpec::Kind::ClosedForm) {
        const double ref = *closed_form(e.model, e.f);
        const double sq = std::sqrt(delta);
        acc = parallel_accumulate_blocks<BiasAcc>(exec, count, [&](std::size_t b, std::size_t end, BiasAcc& a) {
            std::vector<double> y(n + 1);
            for (std::size_t i = b; i < end; ++i) {
                StreamEngine eng(substream(key, i));
                y[0] = e.model.xi0;
                for (std::size_t k = 0; k < n; ++k)
                    y[k + 1] = euler_step(e.model, y[k], coarse->step(k), sq * standard_normal(eng));
                const double v = e.f.eval(PathView{coarse.get(), y, Interpolation::Linear});
                if (!std::isfinite(v)) {
                    ++a.excluded;
                    continue;
                }
                a.m.add(Eigen::Matrix<double, 1, 1>(v - ref));
            }
        });
    } else {
        const std::size_t r = steps_for(delta, reference_mesh(e));
        const std::size_t nf = n * r;
        auto fine = std::make_shared<const TimeGrid>(coarse->refine(r));
        std::shared_ptr<const MollifierOperator> op;
        if (e.epsilon > 0.0)
            op = std::make_shared<const MollifierOperator>(MollifierSpec{e.epsilon, e.kernel_samples}, fine,
                                                           Interpolation::Linear);
        acc = parallel_accumulate_blocks<BiasAcc>(exec, count, [&](std::size_t b, std::size_t end, BiasAcc& a) {
            std::vector<double> inc(nf), x(nf + 1), y(n + 1), yf(nf + 1), mx(nf + 1), my(nf + 1);
            for (std::size_t i = b; i < end; ++i) {
                sample_increments(*fine, substream(key, i), inc);
                x[0] = y[0] = e.model.xi0;
                for (std::size_t k = 0; k < nf; ++k) x[k + 1] = euler_step(e.model, x[k], fine->step(k), inc[k]);
                for (std::size_t k = 0; k < n; ++k) {
                    double dw = 0.0;
                    for (std::size_t j = k * r; j < (k + 1) * r; ++j) dw += inc[j];
                    y[k + 1] = euler_step(e.model, y[k], coarse->step(k), dw);
                }
                double v;
                if (op) {
                    for (std::size_t j = 0; j <= nf; ++j) {
                        const std::size_t k = std::min(j / r, n - 1);
                        const double w = (fine->node(j) - coarse->node(k)) / coarse->step(k);
                        yf[j] = y[k] + w * (y[k + 1] - y[k]);
                    }
                    op->apply(yf, my);
                    op->apply(x, mx);
                    v = e.f.eval(PathView{fine.get(), my, Interpolation::Linear}) -
                        e.f.eval(PathView{fine.get(), mx, Interpolation::Linear});
                } else {
                    v = e.f.eval(PathView{coarse.get(), y, Interpolation::Linear}) -
                        e.f.eval(PathView{fine.get(), x, Interpolation::Linear});
                }
                if (!std::isfinite(v)) {
                    ++a.excluded;
                    continue;
                }
                a.m.add(Eigen::Matrix<double, 1, 1>(v));
            }
        });
    }
    RungResult out;
    out.delta = delta;
    out.n_samples = count;
    out.excluded = acc.excluded;
    out.bias = acc.m.count() ? acc.m.mean()[0] : std::numeric_limits<double>::quiet_NaN();
    out.std_error = acc.m.std_error()[0];
    return out;
}

RateFit fit_rate(const std::vector<RatePoint>& points) {
    std::vector<RatePoint> sig;
    for (const auto& p : points)
        if (std::abs(p.bias) > 4.0 * p.std_error && p.delta > 0.0) sig.push_back(p);
    if (sig.size() < 3)
        throw InsufficientSignal("only " + std::to_string(sig.size()) + " rungs with |bias| > 4 SE; at least 3 needed");
    const bool uniform = std::any_of(sig.begin(), sig.end(), [](const RatePoint& p) { return p.std_error == 0.0; });
    const Eigen::Index n = static_cast<Eigen::Index>(sig.size());
    Eigen::MatrixXd a(n, 2);
    Eigen::VectorXd y(n), w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& p = sig[static_cast<std::size_t>(i)];
        a(i, 0) = 1.0;
        a(i, 1) = std::log(p.delta);
        y[i] = std::log(std::abs(p.bias));
        // delta method: SE(log|bias|) = SE / |bias|
        w[i] = uniform ? 1.0 : std::pow(p.bias / p.std_error, 2);
    }
    const Eigen::VectorXd sw = w.cwiseSqrt();
    const Eigen::MatrixXd aw = sw.asDiagonal() * a;
    const Eigen::VectorXd yw = sw.cwiseProduct(y);
    const Eigen::Vector2d beta = aw.colPivHouseholderQr().solve(yw);
    const Eigen::VectorXd res = yw - aw * beta;
    const double s2 = res.squaredNorm() / static_cast<double>(n - 2);
    const Eigen::Matrix2d cov = s2 * (aw.transpose() * aw).inverse();
    RateFit fit;
    fit.rate = beta[1];
    fit.log_constant = beta[0];
    fit.rate_se = std::sqrt(std::max(0.0, cov(1, 1)));
    fit.ci_lo = fit.rate - 2.0 * fit.rate_se;
    fit.ci_hi = fit.rate + 2.0 * fit.rate_se;
    fit.signal_rungs = sig.size();
    return fit;
}

const RateFit& WeakErrorReport::fitted() const {
    if (!fit) throw InsufficientSignal("only " + std::to_string(signal_rungs) + " signal rungs; no rate fitted");
    return *fit;
}

namespace {

void finish(WeakErrorReport& rep) {
    std::vector<RatePoint> pts;
    rep.signal_rungs = 0;
    for (const auto& r : rep.rungs) {
        pts.push_back({r.delta, r.bias, r.std_error});
        if (r.signal()) ++rep.signal_rungs;
    }
    try {
        rep.fit = fit_rate(pts);
    } catch (const InsufficientSignal&) {
        rep.fit.reset();
    }
}

}  // namespace

WeakErrorReport run_rate_experiment(const RateExperiment& e, const Executor& exec) {
    validate(e);
    WeakErrorReport rep;
    for (std::size_t i = 0; i < e.ladder.size(); ++i) rep.rungs.push_back(coupled_bias(e, i, exec));
    rep.reference = to_string(e.reference.kind);
    if (e.reference.kind == ReferenceSpec::Kind::ClosedForm) {
        rep.reference_note = "closed-form OU expectation; no reference bias";
    } else {
        std::ostringstream s;
        s.precision(17);
        s << "fine Euler reference with factor " << e.reference.factor << " below the finest rung (delta_ref = "
          << reference_mesh(e) << "); every bias carries the same offset E f(X_ref) - E f(X)";
        rep.reference_note = s.str();
    }
    finish(rep);
    return rep;
}

RungResult covariance_bias(const OuParameters& p, double t1, double t2, double horizon, double delta,
                           std::size_t n_samples, const SeedSpec& seed, const Executor& exec) {
    if (!(t1 >= 0.0 && t1 <= horizon && t2 >= 0.0 && t2 <= horizon))
        throw std::invalid_argument("covariance times must lie in [0, T]");
    if (n_samples < 2) throw std::invalid_argument("covariance needs at least two samples");
    const std::size_t n = steps_for(horizon, delta);
    auto grid = make_uniform_grid_ptr(horizon, static_cast<long>(n));
    const SdeModel m = ou_model(p.theta, p.sigma, p.xi0);
    const double sq = std::sqrt(delta);
    using Moments3 = MomentAccumulator<double, 3>;
    struct Acc {
        Moments3 m;
        std::size_t excluded = 0;
        void merge(const Acc& o) {
            m.merge(o.m);
            excluded += o.excluded;
        }
    };
    const auto acc = parallel_accumulate_blocks<Acc>(exec, n_samples, [&](std::size_t b, std::size_t end, Acc& a) {
        std::vector<double> y(n + 1);
        for (std::size_t i = b; i < end; ++i) {
            StreamEngine eng(substream(seed, i));
            y[0] = m.xi0;
            for (std::size_t k = 0; k < n; ++k) y[k + 1] = euler_step(m, y[k], grid->step(k), sq * standard_normal(eng));
            const PathView v{grid.get(), y, Interpolation::Linear};
            const double a1 = eval_path(v, t1), a2 = eval_path(v, t2);
            if (!std::isfinite(a1 * a2)) {
                ++a.excluded;
                continue;
            }
            a.m.add(Eigen::Vector3d(a1, a2, a1 * a2));
        }
    });
    const double cnt = static_cast<double>(acc.m.count());
    const auto& mu = acc.m.mean();
    const double corr = cnt / (cnt - 1.0);
    const Eigen::Vector3d g(-mu[1], -mu[0], 1.0);
    const double var = g.dot(acc.m.covariance() * g) / cnt;
    RungResult out;
    out.delta = delta;
    out.n_samples = n_samples;
    out.excluded = acc.excluded;
    out.bias = (mu[2] - mu[0] * mu[1]) * corr - ou_exact_moments(p, t1, t2).cov;
    out.std_error = std::sqrt(std::max(0.0, var)) * corr;
    return out;
}

WeakErrorReport run_covariance_experiment(const OuParameters& p, double t1, double t2, double horizon,
                                          const std::vector<double>& ladder,
                                          const std::vector<std::size_t>& n_samples, const SeedSpec& seed,
                                          const Executor& exec) {
    if (ladder.size() < 3 || n_samples.size() != ladder.size())
        throw std::invalid_argument("the mesh ladder needs at least three rungs and one sample count each");
    for (std::size_t i = 1; i < ladder.size(); ++i)
        if (!(ladder[i] < ladder[i - 1])) throw std::invalid_argument("the mesh ladder must strictly decrease");
    WeakErrorReport rep;
    for (std::size_t i = 0; i < ladder.size(); ++i)
        rep.rungs.push_back(covariance_bias(p, t1, t2, horizon, ladder[i], n_samples[i], substream(seed, i), exec));
    rep.reference = "closed_form";
    rep.reference_note = "closed-form OU covariance; no reference bias";
    finish(rep);
    return rep;
}

GapStats interpolation_gap_stats(const SdeModel& model, double horizon, double delta, std::size_t refinement,
                                 const PathFunctional& f, std::size_t n_samples, const SeedSpec& seed,
                                 const Executor& exec) {
    constexpr std::size_t kProbes = 16;
    if (refinement < 2) throw std::invalid_argument("gap statistics need at least two fine steps per coarse step");
    if (n_samples < 2) throw std::invalid_argument("gap statistics need at least two samples");
    const std::size_t n = steps_for(horizon, delta);
    const std::size_t r = refinement;
    const std::size_t nf = n * r;
    auto coarse = make_uniform_grid_ptr(horizon, static_cast<long>(n));
    auto fine = std::make_shared<const TimeGrid>(coarse->refine(r));

    std::vector<std::size_t> probe(kProbes);
    for (std::size_t p = 0; p < kProbes; ++p) {
        std::size_t j = static_cast<std::size_t>(std::floor((static_cast<double>(p) + 0.5) * static_cast<double>(nf) / kProbes));
        if (j % r == 0) ++j;
        probe[p] = j;
    }

    using Moments = MomentAccumulator<double, kProbes + 2>;
    using Row = Moments::Vector;
    const auto acc = parallel_accumulate_blocks<Moments>(exec, n_samples, [&](std::size_t b, std::size_t end, Moments& m) {
        std::vector<double> inc(nf), y(n + 1), yf(nf + 1), gap(nf + 1);
        Row row;
        for (std::size_t i = b; i < end; ++i) {
            sample_increments(*fine, substream(seed, i), inc);
            // X~ - Y = sigma_n (W(t) - W(tau_n) - w (W(tau_{n+1}) - W(tau_n))), w = (t - tau_n) / delta;
            // the drift parts of both paths are the same line and cancel.
            y[0] = yf[0] = model.xi0;
            gap[0] = 0.0;
            double sup = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                const double sn = model.diffusion(y[k]);
                const std::size_t lo = k * r;
                double dw = 0.0;
                for (std::size_t j = lo; j < lo + r; ++j) dw += inc[j];
                y[k + 1] = y[k] + model.drift(y[k]) * coarse->step(k) + sn * dw;
                if (!std::isfinite(y[k + 1])) throw NumericalOverflow("non-finite Euler value", k + 1);
                double part = 0.0;
                for (std::size_t j = lo + 1; j <= lo + r; ++j) {
                    part += inc[j - 1];
                    const double w = (fine->node(j) - coarse->node(k)) / coarse->step(k);
                    if (j == lo + r) {
                        yf[j] = y[k + 1];
                        gap[j] = 0.0;
                    } else {
                        yf[j] = y[k] + w * (y[k + 1] - y[k]);
                        gap[j] = sn * (part - w * dw);
                    }
                    sup = std::max(sup, std::abs(gap[j]));
                }
            }
            for (std::size_t p = 0; p < kProbes; ++p) row[static_cast<Eigen::Index>(p)] = gap[probe[p]];
            row[kProbes] = std::pow(sup, 4) / (delta * delta);
            row[kProbes + 1] = f.d1(PathView{fine.get(), yf, Interpolation::Linear},
                                    PathView{fine.get(), gap, Interpolation::Linear});
            m.add(row);
        }
    });

    GapStats out;
    out.delta = delta;
    out.refinement = r;
    out.n_samples = n_samples;
    const auto mu = acc.mean();
    const auto se = acc.std_error();
    out.mean_zero = true;
    for (std::size_t p = 0; p < kProbes; ++p) {
        const auto idx = static_cast<Eigen::Index>(p);
        out.probe_times.push_back(fine->node(probe[p]));
        out.probe_mean.push_back(mu[idx]);
        out.probe_se.push_back(se[idx]);
        const double z = se[idx] > 0.0 ? std::abs(mu[idx]) / se[idx]
                                        : (mu[idx] == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
        out.max_abs_z = std::max(out.max_abs_z, z);
        if (!(std::abs(mu[idx]) <= 4.0 * se[idx])) out.mean_zero = false;
    }
    out.sup4_ratio = mu[kProbes];
    out.sup4_se = se[kProbes];
    out.pairing = mu[kProbes + 1];
    out.pairing_se = se[kProbes + 1];
    out.pairing_zero = std::abs(out.pairing) <= 4.0 * out.pairing_se;
    return out;
}

}  // namespace wpl
