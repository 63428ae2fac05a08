#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "weakpathlab/functionals.hpp"
#include "weakpathlab/models.hpp"
#include "weakpathlab/random.hpp"
#include "weakpathlab/stats.hpp"

namespace wpl {

/// ClosedForm: E f(X) from the OU moments (point and product functionals only).
/// FineGrid: f of a fine Euler path on mesh min(ladder) / factor driven by the
/// same Brownian path; that mesh is shared by all rungs, so the reference bias
/// is a constant offset.
struct ReferenceSpec {
    enum class Kind { ClosedForm, FineGrid };
    Kind kind = Kind::ClosedForm;
    std::size_t factor = 64;
};

std::string to_string(ReferenceSpec::Kind kind);

struct RateExperiment {
    SdeModel model;
    PathFunctional f;
    double horizon = 1.0;
    std::vector<double> ladder;           // strictly decreasing meshes, T / delta integral
    std::vector<std::size_t> n_samples;   // per rung
    ReferenceSpec reference;
    double epsilon = 0.0;  // > 0: f^eps on the reference grid (FineGrid only)
    int kernel_samples = 32;
    SeedSpec seed;
};

/// 2^-2, ..., 2^-6.
std::vector<double> default_ladder();
/// n_coarsest (delta_0 / delta)^2 per rung.
std::vector<std::size_t> delta_squared_rule(const std::vector<double>& ladder, std::size_t n_coarsest);

/// Throws std::invalid_argument when the experiment is not runnable.
void validate(const RateExperiment& exp);

struct RungResult {
    double delta = 0.0;
    std::size_t n_samples = 0;
    double bias = 0.0;
    double std_error = 0.0;
    std::size_t excluded = 0;  // samples dropped after numerical overflow

    bool signal() const { return std::abs(bias) > 4.0 * std_error; }
};

/// Mean of f(Y) - reference over the rung's samples.
RungResult coupled_bias(const RateExperiment& exp, std::size_t rung, const Executor& exec = Executor{});

struct RatePoint {
    double delta = 0.0;
    double bias = 0.0;
    double std_error = 0.0;
};

struct RateFit {
    double rate = 0.0;
    double rate_se = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    double log_constant = 0.0;  // log |bias| ~ log_constant + rate log delta
    std::size_t signal_rungs = 0;
};

/// Weighted least squares of log|bias| on log delta over the points with
/// |bias| > 4 SE, weights (bias / SE)^2 (uniform if any SE is 0).
/// The slope SE is scaled by the residual variance; ci = rate +- 2 SE.
/// Throws InsufficientSignal with fewer than three such points.
RateFit fit_rate(const std::vector<RatePoint>& points);

struct WeakErrorReport {
    std::vector<RungResult> rungs;
    std::optional<RateFit> fit;
    std::size_t signal_rungs = 0;
    std::string reference;
    std::string reference_note;

    /// The fit; throws InsufficientSignal if there was none.
    const RateFit& fitted() const;
};

WeakErrorReport run_rate_experiment(const RateExperiment& exp, const Executor& exec = Executor{});

/// Sample Cov(Y(t1), Y(t2)) (n / (n - 1) corrected; Y linear between nodes) minus the OU closed form.
RungResult covariance_bias(const OuParameters& p, double t1, double t2, double horizon, double delta,
                           std::size_t n_samples, const SeedSpec& seed, const Executor& exec = Executor{});

WeakErrorReport run_covariance_experiment(const OuParameters& p, double t1, double t2, double horizon,
                                          const std::vector<double>& ladder,
                                          const std::vector<std::size_t>& n_samples, const SeedSpec& seed,
                                          const Executor& exec = Executor{});

struct GapStats {
    double delta = 0.0;
    std::size_t refinement = 0;
    std::size_t n_samples = 0;
    // (a) E[X~ - Y] at 16 probe fine nodes off the coarse grid
    std::vector<double> probe_times, probe_mean, probe_se;
    double max_abs_z = 0.0;
    bool mean_zero = false;
    // (b) E sup |X~ - Y|^4 / delta^2 over the fine nodes
    double sup4_ratio = 0.0;
    double sup4_se = 0.0;
    // (c) E Df(Y)(X~ - Y)
    double pairing = 0.0;
    double pairing_se = 0.0;
    bool pairing_zero = false;
};

/// 48 (4/3)^4, the moment bound for b = 0, sigma = 1.
inline constexpr double kSup4Bound = 48.0 * (256.0 / 81.0);

GapStats interpolation_gap_stats(const SdeModel& model, double horizon, double delta, std::size_t refinement,
                                 const PathFunctional& f, std::size_t n_samples, const SeedSpec& seed,
                                 const Executor& exec = Executor{});

}  // namespace wpl
