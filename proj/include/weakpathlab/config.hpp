#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "weakpathlab/functionals.hpp"
#include "weakpathlab/models.hpp"

namespace wpl {

enum class Command {
    WeakRate,
    CovarianceBias,
    GapStats,
    KolmogorovCheck,
    MartingaleCheck,
    ItoCheck,
    ErrorRepresentation,
    MollifierAudit,
};

std::string to_string(Command c);
/// Throws UnknownName("command", ...).
Command command_from_string(const std::string& name);

struct ModelConfig {
    std::string name = "ou";  // ou | sine | constant
    double theta = 1.0, sigma = 1.0;
    double a = 0.5, c = 1.0;
    double drift = 0.0, diffusion = 1.0;
    double xi0 = 1.0;
};

struct FunctionalConfig {
    std::string name;  // point | product | integral | smooth_max; empty: command default
    std::optional<double> t;          // point; default T
    std::optional<double> t1, t2;     // product; default 0.5 T, T
    std::string g = "sin";            // integral
    double beta = 1.0;                // smooth_max
};

struct GridConfig {
    // Zero or empty fields take the command default in finalize().
    std::vector<double> ladder;  // weak-rate, covariance-bias, gap-stats
    std::size_t steps = 0;       // fine steps of nested checks; base steps of ito-check
    std::size_t coarse_steps = 2;
    std::size_t refinement = 0;
    std::size_t quadrature = 0;
    int halvings = 4;
};

struct BudgetConfig {
    std::size_t n_samples = 0;  // per coarsest rung for weak-rate and covariance-bias
    std::size_t n_inner = 0;
    std::size_t n_outer = 0;
    double cap = 5e9;
    std::string scale = "delta_squared";  // delta_squared | constant
};

struct ExperimentConfig {
    std::optional<Command> command;
    ModelConfig model;
    FunctionalConfig functional;
    double horizon = 0.0;
    GridConfig grid;
    double epsilon = 0.0;
    int kernel_samples = 32;
    BudgetConfig budget;
    std::uint64_t seed = 0;
    std::string reference = "closed_form";  // closed_form | fine_grid
    std::size_t reference_factor = 64;
    std::vector<double> times;
    std::string fault = "none";  // none | drop_half
    std::string qv = "bracket";
    double rate_lo = 0.7, rate_hi = 1.3;
    double ratio_bound = 3.0;
    std::string out_dir = "runs";

    /// Effective configuration with every default filled in.
    nlohmann::json to_json() const;
};

/// Strict parse of a JSON document. Unknown keys, wrong types and invalid
/// values raise ParseError naming the offending key path; unknown model,
/// functional, integrand or command names raise UnknownName.
ExperimentConfig parse_config(const std::string& text);

/// Fills command-dependent defaults (ladder, sample counts, horizon) and
/// checks cross-field rules. Throws ParseError.
void finalize(ExperimentConfig& cfg, Command command);

SdeModel build_model(const ExperimentConfig& cfg);
PathFunctional build_functional(const ExperimentConfig& cfg);

/// 64-bit FNV-1a of the text.
std::uint64_t fnv1a(const std::string& text);

}  // namespace wpl
