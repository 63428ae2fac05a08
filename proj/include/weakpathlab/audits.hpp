#pragma once

#include <string>
#include <vector>

#include "weakpathlab/random.hpp"

namespace wpl {

struct AuditCheck {
    std::string name;
    double value = 0.0;
    double tolerance = 0.0;
    bool passed = false;
};

/// Contraction over n_paths random paths in both interpolation modes, linearity, exact causality
/// under future edits and the ramp identity M(t) = t - eps/2 for t >= eps.
std::vector<AuditCheck> mollifier_audit(std::size_t n_paths, const SeedSpec& seed);

/// Haar coefficients up to each level J <= max_level, Schauder reconstruction on the dyadic
/// nodes of level J, max error over n_paths Brownian paths.
std::vector<AuditCheck> haar_round_trip(int max_level, std::size_t n_paths, const SeedSpec& seed);

}  // namespace wpl
