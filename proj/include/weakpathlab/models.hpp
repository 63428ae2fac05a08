#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "weakpathlab/core_paths.hpp"

namespace wpl {

using ScalarMap = std::function<double(double)>;

/// b(x) = drift0 + drift1 x, sigma(x) = diffusion0 + diffusion1 x.
/// Models carrying this form skip the type-erased evaluators in inner loops.
struct AffineCoefficients {
    double drift0 = 0.0;
    double drift1 = 0.0;
    double diffusion0 = 0.0;
    double diffusion1 = 0.0;
};

struct OuParameters {
    double theta = 1.0;
    double sigma = 1.0;
    double xi0 = 0.0;
};

/// Scalar SDE dX = b(X) dt + sigma(X) dW, X(0) = xi0, with derivatives of the
/// coefficients up to order two.
struct SdeModel {
    std::string name;
    ScalarMap b, sigma;
    ScalarMap db, d2b, dsigma, d2sigma;
    double nondegeneracy_c = 0.0;
    double xi0 = 0.0;
    std::optional<AffineCoefficients> affine;
    std::optional<OuParameters> ou;

    double drift(double x) const { return affine ? affine->drift0 + affine->drift1 * x : b(x); }
    double diffusion(double x) const { return affine ? affine->diffusion0 + affine->diffusion1 * x : sigma(x); }
    double drift_derivative(double x) const { return affine ? affine->drift1 : db(x); }
    double diffusion_derivative(double x) const { return affine ? affine->diffusion1 : dsigma(x); }
};

/// b(x) = -theta x, sigma(x) = sigma.
SdeModel ou_model(double theta, double sigma, double xi0);
/// b(x) = -sin x, sigma(x) = c + a sin x; requires c > |a| > 0.
SdeModel sine_model(double a, double c, double xi0);
/// b = drift and sigma = diffusion everywhere. Degenerate choices are allowed
/// here (used for the frozen and pure-noise limit cases).
SdeModel constant_model(double drift, double diffusion, double xi0);

struct OuMoments {
    double mean1 = 0.0;
    double mean2 = 0.0;
    double cov = 0.0;
};

OuMoments ou_exact_moments(const OuParameters& p, double t1, double t2);

struct AssumptionViolation {
    enum class Kind { Nondegeneracy, DriftDerivative, DriftSecondDerivative, DiffusionDerivative, DiffusionSecondDerivative };
    Kind kind;
    double x = 0.0;
    double expected = 0.0;
    double actual = 0.0;
};

std::string to_string(AssumptionViolation::Kind kind);

struct AssumptionReport {
    std::vector<AssumptionViolation> violations;
    double probe_min = 0.0;
    double probe_max = 0.0;
    std::size_t probes = 0;

    bool ok() const noexcept { return violations.empty(); }
};

/// Spot-checks |sigma(x)| >= nondegeneracy_c and the derivative evaluators
/// against central differences (relative tolerance 1e-5) at every probe.
AssumptionReport check_assumptions(const SdeModel& model, std::span<const double> probe_points);

/// Coefficients frozen at the last node tau_n(t) <= t of `grid`:
/// b~(t, x) = b(x(tau_n(t))), sigma~(t, x) = sigma(x(tau_n(t))).
class FrozenCoefficients {
public:
    FrozenCoefficients(SdeModel base, GridPtr grid);

    double frozen_time(double t) const;
    double drift(double t, const PathView& x) const;
    double diffusion(double t, const PathView& x) const;

    const SdeModel& base() const noexcept { return base_; }
    const TimeGrid& grid() const noexcept { return *grid_; }

private:
    SdeModel base_;
    GridPtr grid_;
};

}  // namespace wpl
