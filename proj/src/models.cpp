#include "weakpathlab/models.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace wpl {

SdeModel ou_model(double theta, double sigma, double xi0) {
    if (!(theta > 0.0) || !(sigma > 0.0)) throw std::invalid_argument("OU parameters must be positive");
    SdeModel m;
    m.name = "ou";
    m.b = [theta](double x) { return -theta * x; };
    m.sigma = [sigma](double) { return sigma; };
    m.db = [theta](double) { return -theta; };
    m.d2b = [](double) { return 0.0; };
    m.dsigma = [](double) { return 0.0; };
    m.d2sigma = [](double) { return 0.0; };
    m.nondegeneracy_c = sigma;
    m.xi0 = xi0;
    m.affine = AffineCoefficients{0.0, -theta, sigma, 0.0};
    m.ou = OuParameters{theta, sigma, xi0};
    return m;
}

SdeModel sine_model(double a, double c, double xi0) {
    if (!(a != 0.0) || !(c > std::abs(a))) throw std::invalid_argument("sine model requires c > |a| > 0");
    SdeModel m;
    m.name = "sine";
    m.b = [](double x) { return -std::sin(x); };
    m.sigma = [a, c](double x) { return c + a * std::sin(x); };
    m.db = [](double x) { return -std::cos(x); };
    m.d2b = [](double x) { return std::sin(x); };
    m.dsigma = [a](double x) { return a * std::cos(x); };
    m.d2sigma = [a](double x) { return -a * std::sin(x); };
    m.nondegeneracy_c = c - std::abs(a);
    m.xi0 = xi0;
    return m;
}

SdeModel constant_model(double drift, double diffusion, double xi0) {
    SdeModel m;
    m.name = "constant";
    m.b = [drift](double) { return drift; };
    m.sigma = [diffusion](double) { return diffusion; };
    m.db = m.d2b = m.dsigma = m.d2sigma = [](double) { return 0.0; };
    m.nondegeneracy_c = std::abs(diffusion);
    m.xi0 = xi0;
    m.affine = AffineCoefficients{drift, 0.0, diffusion, 0.0};
    return m;
}

OuMoments ou_exact_moments(const OuParameters& p, double t1, double t2) {
    if (!(t1 >= 0.0) || t1 > t2) throw std::invalid_argument("OU moments require 0 <= t1 <= t2");
    OuMoments out;
    out.mean1 = p.xi0 * std::exp(-p.theta * t1);
    out.mean2 = p.xi0 * std::exp(-p.theta * t2);
    out.cov = p.sigma * p.sigma / (2.0 * p.theta) * std::exp(-p.theta * (t2 - t1)) *
              (-std::expm1(-2.0 * p.theta * t1));
    return out;
}

std::string to_string(AssumptionViolation::Kind kind) {
    switch (kind) {
        case AssumptionViolation::Kind::Nondegeneracy: return "nondegeneracy";
        case AssumptionViolation::Kind::DriftDerivative: return "db";
        case AssumptionViolation::Kind::DriftSecondDerivative: return "d2b";
        case AssumptionViolation::Kind::DiffusionDerivative: return "dsigma";
        case AssumptionViolation::Kind::DiffusionSecondDerivative: return "d2sigma";
    }
    return "?";
}

namespace {

double central_difference(const ScalarMap& f, double x) {
    const double h = 1e-4 * (1.0 + std::abs(x));
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

}  // namespace

AssumptionReport check_assumptions(const SdeModel& model, std::span<const double> probe_points) {
    if (probe_points.empty()) throw std::invalid_argument("probe set must not be empty");
    using Kind = AssumptionViolation::Kind;
    AssumptionReport report;
    report.probes = probe_points.size();
    report.probe_min = *std::min_element(probe_points.begin(), probe_points.end());
    report.probe_max = *std::max_element(probe_points.begin(), probe_points.end());

    const auto check_derivative = [&](Kind kind, const ScalarMap& f, const ScalarMap& df, double x) {
        const double fd = central_difference(f, x);
        const double d = df(x);
        if (std::abs(d - fd) > 1e-5 * std::max(1.0, std::abs(fd))) report.violations.push_back({kind, x, fd, d});
    };

    for (double x : probe_points) {
        const double s = std::abs(model.sigma(x));
        if (s < model.nondegeneracy_c || s == 0.0)
            report.violations.push_back({Kind::Nondegeneracy, x, model.nondegeneracy_c, s});
        check_derivative(Kind::DriftDerivative, model.b, model.db, x);
        check_derivative(Kind::DriftSecondDerivative, model.db, model.d2b, x);
        check_derivative(Kind::DiffusionDerivative, model.sigma, model.dsigma, x);
        check_derivative(Kind::DiffusionSecondDerivative, model.dsigma, model.d2sigma, x);
    }
    return report;
}

FrozenCoefficients::FrozenCoefficients(SdeModel base, GridPtr grid) : base_(std::move(base)), grid_(std::move(grid)) {
    if (!grid_) throw std::invalid_argument("frozen coefficients require a grid");
}

double FrozenCoefficients::frozen_time(double t) const { return grid_->node(grid_->last_node_at_or_before(t)); }

double FrozenCoefficients::drift(double t, const PathView& x) const { return base_.drift(eval_path(x, frozen_time(t))); }

double FrozenCoefficients::diffusion(double t, const PathView& x) const {
    return base_.diffusion(eval_path(x, frozen_time(t)));
}

}  // namespace wpl
