#include "weakpathlab/runner.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "weakpathlab/audits.hpp"
#include "weakpathlab/errors.hpp"
#include "weakpathlab/functional_calculus.hpp"
#include "weakpathlab/weak_error.hpp"

namespace wpl {

namespace fs = std::filesystem;
using nlohmann::json;

std::string reason(ExitCode c) {
    switch (c) {
        case ExitCode::Passed: return "ok";
        case ExitCode::CheckFailed: return "check_failed";
        case ExitCode::InsufficientSignal: return "insufficient_signal";
        case ExitCode::BudgetExceeded: return "budget_exceeded";
        case ExitCode::ConfigError: return "config_error";
        case ExitCode::NumericalError: return "numerical_error";
    }
    return "unknown";
}

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Log lines only; files keep full precision.
std::string brief(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

class Csv {
public:
    explicit Csv(std::vector<std::string> header) : width_(header.size()) { line(header); }

    template <typename... Cells>
    void row(const Cells&... cells) {
        std::vector<std::string> v{cell(cells)...};
        if (v.size() != width_) throw std::logic_error("csv row width mismatch");
        line(v);
    }

    std::string str() const { return out_.str(); }

private:
    static std::string cell(double v) { return num(v); }
    static std::string cell(std::size_t v) { return std::to_string(v); }
    static std::string cell(int v) { return std::to_string(v); }
    static std::string cell(bool v) { return v ? "1" : "0"; }
    static std::string cell(const std::string& v) { return v; }
    static std::string cell(const char* v) { return v; }

    void line(const std::vector<std::string>& v) {
        for (std::size_t i = 0; i < v.size(); ++i) out_ << (i ? "," : "") << v[i];
        out_ << '\n';
    }

    std::size_t width_;
    std::ostringstream out_;
};

struct Outcome {
    std::vector<CheckResult> checks;
    json summary = json::object();
    std::string csv;
    ExitCode code = ExitCode::Passed;  // only InsufficientSignal overrides the check outcome
    std::string message;
};

CheckResult upper_check(std::string name, double value, double se, double tol) {
    return {std::move(name), value, se, tol, std::abs(value) <= tol};
}

CheckResult interval_check(std::string name, double value, double se, double lo, double hi) {
    return {std::move(name), value, se, json::array({lo, hi}), value >= lo && value <= hi};
}

json rungs_json(const WeakErrorReport& rep) {
    json a = json::array();
    for (const auto& r : rep.rungs)
        a.push_back({{"delta", r.delta}, {"n_samples", r.n_samples}, {"bias", r.bias}, {"std_error", r.std_error},
                     {"excluded", r.excluded}, {"signal", r.signal()}});
    return a;
}

std::string rungs_csv(const WeakErrorReport& rep) {
    Csv csv({"delta", "n_samples", "bias", "std_error", "excluded"});
    for (const auto& r : rep.rungs) csv.row(r.delta, r.n_samples, r.bias, r.std_error, r.excluded);
    return csv.str();
}

std::vector<std::size_t> rung_samples(const ExperimentConfig& cfg) {
    if (cfg.budget.scale == "constant") return std::vector<std::size_t>(cfg.grid.ladder.size(), cfg.budget.n_samples);
    return delta_squared_rule(cfg.grid.ladder, cfg.budget.n_samples);
}

void rate_summary(Outcome& o, const WeakErrorReport& rep, const ExperimentConfig& cfg) {
    o.csv = rungs_csv(rep);
    o.summary["rungs"] = rungs_json(rep);
    o.summary["signal_rungs"] = rep.signal_rungs;
    o.summary["reference"] = rep.reference;
    o.summary["reference_note"] = rep.reference_note;
    o.checks.push_back({"signal_rungs", static_cast<double>(rep.signal_rungs), 0.0, json::array({3, nullptr}),
                        rep.signal_rungs >= 3});
    if (!rep.fit) {
        o.summary["rate"] = nullptr;
        o.summary["rate_ci"] = nullptr;
        o.code = ExitCode::InsufficientSignal;
        o.message = "fewer than 3 rungs with |bias| > 4 SE";
        return;
    }
    o.summary["rate"] = rep.fit->rate;
    o.summary["rate_ci"] = {rep.fit->ci_lo, rep.fit->ci_hi};
    o.checks.push_back(interval_check("rate", rep.fit->rate, rep.fit->rate_se, cfg.rate_lo, cfg.rate_hi));
}

Outcome weak_rate(const ExperimentConfig& cfg, const SeedSpec& seed, const Executor& exec) {
    RateExperiment e;
    e.model = build_model(cfg);
    e.f = build_functional(cfg);
    e.horizon = cfg.horizon;
    e.ladder = cfg.grid.ladder;
    e.n_samples = rung_samples(cfg);
    e.reference = {cfg.reference == "fine_grid" ? ReferenceSpec::Kind::FineGrid : ReferenceSpec::Kind::ClosedForm,
                   cfg.reference_factor};
    e.epsilon = cfg.epsilon;
    e.kernel_samples = cfg.kernel_samples;
    e.seed = seed;
    Outcome o;
    rate_summary(o, run_rate_experiment(e, exec), cfg);
    return o;
}

Outcome covariance(const ExperimentConfig& cfg, const SeedSpec& seed, const Executor& exec) {
    const OuParameters p{cfg.model.theta, cfg.model.sigma, cfg.model.xi0};
    const auto rep = run_covariance_experiment(p, cfg.times[0], cfg.times[1], cfg.horizon, cfg.grid.ladder,
                                               rung_samples(cfg), seed, exec);
    Outcome o;
    rate_summary(o, rep, cfg);
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto& r : rep.rungs)
        if (r.signal()) {
            lo = std::min(lo, std::abs(r.bias) / r.delta);
            hi = std::max(hi, std::abs(r.bias) / r.delta);
        }
    if (rep.signal_rungs >= 1) {
        const double ratio = hi / lo;
        o.summary["bias_over_delta"] = {lo, hi};
        o.checks.push_back(upper_check("bias_over_delta_ratio", ratio, 0.0, cfg.ratio_bound));
    }
    return o;
}

Outcome gap_stats(const ExperimentConfig& cfg, const SeedSpec& seed, const Executor& exec) {
    const SdeModel model = build_model(cfg);
    const PathFunctional f = build_functional(cfg);
    const bool brownian = model.affine && model.affine->drift0 == 0.0 && model.affine->drift1 == 0.0 &&
                          model.affine->diffusion0 == 1.0 && model.affine->diffusion1 == 0.0;
    Outcome o;
    Csv csv({"delta", "refinement", "n_samples", "max_abs_z", "sup4_ratio", "sup4_se", "pairing", "pairing_se"});
    json rows = json::array();
    for (std::size_t i = 0; i < cfg.grid.ladder.size(); ++i) {
        const double d = cfg.grid.ladder[i];
        const auto g = interpolation_gap_stats(model, cfg.horizon, d, cfg.grid.refinement, f, cfg.budget.n_samples,
                                               substream(seed, i), exec);
        csv.row(d, g.refinement, g.n_samples, g.max_abs_z, g.sup4_ratio, g.sup4_se, g.pairing, g.pairing_se);
        rows.push_back({{"delta", d},
                        {"probe_times", g.probe_times},
                        {"probe_mean", g.probe_mean},
                        {"probe_se", g.probe_se},
                        {"sup4_ratio", g.sup4_ratio},
                        {"pairing", g.pairing},
                        {"pairing_se", g.pairing_se}});
        const std::string tag = "@" + num(d);
        o.checks.push_back({"gap_mean" + tag, g.max_abs_z, 0.0, 4.0, g.mean_zero});
        o.checks.push_back(upper_check("gap_pairing" + tag, g.pairing, g.pairing_se, 4.0 * g.pairing_se));
        if (brownian) o.checks.push_back(upper_check("gap_sup4" + tag, g.sup4_ratio, g.sup4_se, 1.25 * kSup4Bound));
    }
    o.csv = csv.str();
    o.summary["rungs"] = rows;
    return o;
}

NestedSetup nested(const ExperimentConfig& cfg) {
    auto grid = make_uniform_grid_ptr(cfg.horizon, static_cast<long>(cfg.grid.steps));
    return make_nested_setup(build_model(cfg), build_functional(cfg), grid, cfg.epsilon, cfg.kernel_samples);
}

json components(const ResidualReport& r) {
    json c = json::object();
    for (const auto& [k, v] : r.components) c[k] = v;
    return c;
}

Outcome kolmogorov(const ExperimentConfig& cfg, const SeedSpec& seed, const Executor& exec) {
    const auto setup = nested(cfg);
    const auto fault = cfg.fault == "drop_half" ? KolmogorovFault::DropHalfFactor : KolmogorovFault::None;
    const auto r = kolmogorov_check(setup, cfg.times[0], cfg.budget.n_outer, cfg.budget.n_inner, 1, seed, fault, exec);
    Outcome o;
    Csv csv({"t", "steps", "n_outer", "n_inner", "residual", "std_error", "tolerance", "horizontal", "drift_term",
             "diffusion_term", "passed"});
    csv.row(cfg.times[0], cfg.grid.steps, cfg.budget.n_outer, cfg.budget.n_inner, r.residual, r.std_error, r.tolerance,
            r.components.at("horizontal"), r.components.at("drift_term"), r.components.at("diffusion_term"), r.passed);
    o.csv = csv.str();
    o.summary["components"] = components(r);
    o.summary["fault"] = cfg.fault;
    o.checks.push_back({"kolmogorov", r.residual, r.std_error, r.tolerance, r.passed});
    return o;
}

Outcome martingale(const ExperimentConfig& cfg, const SeedSpec& seed, const Executor& exec) {
    const auto setup = nested(cfg);
    const auto r = martingale_gap(setup, cfg.times[0], cfg.times[1], cfg.budget.n_outer, cfg.budget.n_inner, seed, exec);
    Outcome o;
    Csv csv({"s", "t", "n_outer", "n_inner", "gap", "std_error", "tolerance", "F_s", "F_t", "passed"});
    csv.row(cfg.times[0], cfg.times[1], cfg.budget.n_outer, cfg.budget.n_inner, r.residual, r.std_error, r.tolerance,
            r.components.at("F_s"), r.components.at("F_t"), r.passed);
    o.csv = csv.str();
    o.summary["components"] = components(r);
    o.checks.push_back({"martingale_gap", r.residual, r.std_error, r.tolerance, r.passed});
    return o;
}

Outcome ito(const ExperimentConfig& cfg, const SeedSpec& seed, const Executor& exec) {
    const auto mode = cfg.qv == "realized" ? QvMode::Realized : QvMode::Bracket;
    const auto c = ito_check(cfg.horizon, cfg.grid.steps, cfg.grid.halvings, cfg.budget.n_samples, seed, mode, exec);
    Outcome o;
    Csv csv({"mesh", "rms", "ratio"});
    for (std::size_t i = 0; i < c.mesh.size(); ++i) {
        if (i == 0)
            csv.row(c.mesh[i], c.rms[i], std::string());
        else
            csv.row(c.mesh[i], c.rms[i], c.ratio[i - 1]);
    }
    o.csv = csv.str();
    o.summary["mesh"] = c.mesh;
    o.summary["rms"] = c.rms;
    o.summary["ratio"] = c.ratio;
    o.summary["passed"] = c.passed;
    for (std::size_t i = 0; i < c.ratio.size(); ++i)
        o.checks.push_back(interval_check("ito_ratio_" + std::to_string(i + 1), c.ratio[i], 0.0, c.ratio_lo, c.ratio_hi));
    return o;
}

Outcome error_representation(const ExperimentConfig& cfg, const SeedSpec& seed, const Executor& exec) {
    const SdeModel model = build_model(cfg);
    const PathFunctional f = build_functional(cfg);
    ErrorRepresentationSpec spec;
    spec.horizon = cfg.horizon;
    spec.coarse_steps = cfg.grid.coarse_steps;
    spec.refinement = cfg.grid.refinement;
    spec.quadrature_per_step = cfg.grid.quadrature;
    spec.epsilon = cfg.epsilon;
    spec.kernel_samples = cfg.kernel_samples;
    spec.n_outer = cfg.budget.n_outer;
    spec.n_inner = cfg.budget.n_inner;
    spec.budget_cap = cfg.budget.cap;
    spec.seed = seed;

    // Degenerate case: one fine step per coarse step, so X~ and X coincide.
    ErrorRepresentationSpec same = spec;
    same.refinement = 1;
    same.quadrature_per_step = 0;
    same.seed = substream(seed, 1);
    if (same.epsilon <= 0.0) same.epsilon = 2.0 * spec.horizon / static_cast<double>(spec.coarse_steps);

    const auto a = error_representation_sides(model, f, spec, exec);
    const auto b = error_representation_sides(model, f, same, exec);
    Outcome o;
    Csv csv({"case", "refinement", "lhs", "lhs_se", "rhs", "rhs_se", "difference", "difference_se", "tolerance",
             "projected_continuations", "passed"});
    csv.row("identity", spec.refinement, a.lhs.value, a.lhs.std_error, a.rhs.value, a.rhs.std_error, a.difference,
            a.difference_se, a.tolerance, a.projected_continuations, a.passed);
    csv.row("degenerate", same.refinement, b.lhs.value, b.lhs.std_error, b.rhs.value, b.rhs.std_error, b.difference,
            b.difference_se, b.tolerance, b.projected_continuations, b.passed);
    o.csv = csv.str();
    o.checks.push_back({"error_representation", a.difference, a.difference_se, a.tolerance, a.passed});
    o.checks.push_back({"degenerate_lhs", b.lhs.value, b.lhs.std_error, 4.0 * b.lhs.std_error,
                        std::abs(b.lhs.value) <= 4.0 * b.lhs.std_error});
    o.checks.push_back({"degenerate_rhs", b.rhs.value, b.rhs.std_error, 4.0 * b.rhs.std_error,
                        std::abs(b.rhs.value) <= 4.0 * b.rhs.std_error});
    o.summary["projected_continuations"] = a.projected_continuations + b.projected_continuations;
    return o;
}

Outcome mollifier(const ExperimentConfig& cfg, const SeedSpec& seed) {
    const auto checks = mollifier_audit(cfg.budget.n_samples, seed);
    Outcome o;
    Csv csv({"check", "value", "tolerance", "passed"});
    for (const auto& c : checks) {
        csv.row(c.name, c.value, c.tolerance, c.passed);
        o.checks.push_back({c.name, c.value, 0.0, c.tolerance, c.passed});
    }
    o.csv = csv.str();
    return o;
}

fs::path next_run_dir(const fs::path& root) {
    fs::create_directories(root);
    int next = 1;
    for (const auto& e : fs::directory_iterator(root)) {
        const std::string n = e.path().filename().string();
        if (n.size() == 8 && n.rfind("run-", 0) == 0 && std::all_of(n.begin() + 4, n.end(), ::isdigit))
            next = std::max(next, std::stoi(n.substr(4)) + 1);
    }
    for (;; ++next) {
        char name[16];
        std::snprintf(name, sizeof name, "run-%04d", next);
        const fs::path p = root / name;
        if (fs::create_directory(p)) return p;
    }
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    f << text;
    if (!f) throw std::runtime_error("cannot write " + p.string());
}

json check_json(const CheckResult& c, const ExperimentConfig& cfg) {
    return {{"check", c.check},
            {"value", c.value},
            {"std_error", c.std_error},
            {"tolerance", c.tolerance},
            {"passed", c.passed},
            {"budget", cfg.to_json()["budget"]},
            {"seed", cfg.seed}};
}

std::string tolerance_text(const json& t) {
    if (t.is_number()) return brief(t.get<double>());
    std::string s = "[";
    for (std::size_t i = 0; i < t.size(); ++i) s += (i ? "," : "") + (t[i].is_null() ? std::string("inf") : brief(t[i].get<double>()));
    return s + "]";
}

RunResult fail(ExitCode code, const std::string& message, std::ostream& log) {
    RunResult r;
    r.code = code;
    r.message = message;
    log << "reason=" << reason(code) << " message=\"" << message << "\"\n";
    return r;
}

}  // namespace

RunResult run(Command command, ExperimentConfig cfg, const RunOptions& options, std::ostream& log) {
    try {
        if (options.seed) cfg.seed = *options.seed;
        if (options.out_dir) cfg.out_dir = *options.out_dir;
        finalize(cfg, command);
        build_model(cfg);
        build_functional(cfg);
    } catch (const ParseError& e) {
        return fail(ExitCode::ConfigError, e.what(), log);
    } catch (const UnknownName& e) {
        return fail(ExitCode::ConfigError, e.what(), log);
    }

    const SeedSpec seed{cfg.seed, 0};
    const Executor exec(options.threads);
    Outcome o;
    try {
        switch (command) {
            case Command::WeakRate: o = weak_rate(cfg, seed, exec); break;
            case Command::CovarianceBias: o = covariance(cfg, seed, exec); break;
            case Command::GapStats: o = gap_stats(cfg, seed, exec); break;
            case Command::KolmogorovCheck: o = kolmogorov(cfg, seed, exec); break;
            case Command::MartingaleCheck: o = martingale(cfg, seed, exec); break;
            case Command::ItoCheck: o = ito(cfg, seed, exec); break;
            case Command::ErrorRepresentation: o = error_representation(cfg, seed, exec); break;
            case Command::MollifierAudit: o = mollifier(cfg, seed); break;
        }
    } catch (const BudgetExceeded& e) {
        return fail(ExitCode::BudgetExceeded, e.what(), log);
    } catch (const InsufficientSignal& e) {
        return fail(ExitCode::InsufficientSignal, e.what(), log);
    } catch (const NumericalOverflow& e) {
        return fail(ExitCode::NumericalError, e.what(), log);
    } catch (const std::invalid_argument& e) {
        return fail(ExitCode::ConfigError, e.what(), log);
    }

    RunResult res;
    res.checks = o.checks;
    const bool all = std::all_of(o.checks.begin(), o.checks.end(), [](const CheckResult& c) { return c.passed; });
    res.code = o.code != ExitCode::Passed ? o.code : (all ? ExitCode::Passed : ExitCode::CheckFailed);
    res.message = o.message;

    const json effective = cfg.to_json();
    // Where a run is written does not change what it computes.
    json hashed = effective;
    hashed.erase("out_dir");
    const std::string canonical = hashed.dump();
    std::ostringstream hash;
    hash << std::hex << std::setw(16) << std::setfill('0') << fnv1a(canonical);

    json report{{"command", to_string(command)}, {"summary", o.summary}, {"reason", reason(res.code)}};
    report["checks"] = json::array();
    for (const auto& c : o.checks) report["checks"].push_back(check_json(c, cfg));
    const json manifest{{"command", to_string(command)},
                        {"config", effective},
                        {"config_hash", "fnv1a64:" + hash.str()},
                        {"seed", cfg.seed},
                        {"version", WEAKPATHLAB_VERSION},
                        {"files", {"report.json", "results.csv"}}};
    try {
        res.run_dir = next_run_dir(cfg.out_dir);
        write_file(res.run_dir / "manifest.json", manifest.dump(2) + "\n");
        write_file(res.run_dir / "report.json", report.dump(2) + "\n");
        write_file(res.run_dir / "results.csv", o.csv);
    } catch (const std::exception& e) {
        return fail(ExitCode::ConfigError, std::string("cannot write outputs: ") + e.what(), log);
    }

    for (const auto& c : o.checks)
        log << "check=" << c.check << " value=" << brief(c.value) << " tolerance=" << tolerance_text(c.tolerance)
            << " passed=" << (c.passed ? "true" : "false") << "\n";
    log << "run_dir=" << res.run_dir.string() << "\n";
    log << "reason=" << reason(res.code);
    if (!res.message.empty()) log << " message=\"" << res.message << "\"";
    log << "\n";
    return res;
}

RunResult run_file(Command command, const fs::path& config, const RunOptions& options, std::ostream& log) {
    std::ifstream f(config, std::ios::binary);
    if (!f) return fail(ExitCode::ConfigError, "cannot read config " + config.string(), log);
    std::stringstream text;
    text << f.rdbuf();
    try {
        return run(command, parse_config(text.str()), options, log);
    } catch (const ParseError& e) {
        return fail(ExitCode::ConfigError, e.what(), log);
    } catch (const UnknownName& e) {
        return fail(ExitCode::ConfigError, e.what(), log);
    }
}

}  // namespace wpl
