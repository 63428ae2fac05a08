#include "weakpathlab/config.hpp"

#include <cmath>
#include <set>

#include "weakpathlab/errors.hpp"
#include "weakpathlab/weak_error.hpp"

namespace wpl {

using nlohmann::json;

namespace {

const std::pair<Command, const char*> kCommands[] = {
    {Command::WeakRate, "weak-rate"},
    {Command::CovarianceBias, "covariance-bias"},
    {Command::GapStats, "gap-stats"},
    {Command::KolmogorovCheck, "kolmogorov-check"},
    {Command::MartingaleCheck, "martingale-check"},
    {Command::ItoCheck, "ito-check"},
    {Command::ErrorRepresentation, "error-representation"},
    {Command::MollifierAudit, "mollifier-audit"},
};

// Reads the members of one JSON object and rejects any it was not asked about.
class Object {
public:
    Object(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ParseError(path_.empty() ? "$" : path_, "expected an object");
    }

    std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    bool has(const std::string& key) const { return j_.contains(key); }

    const json* take(const std::string& key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void number(const std::string& key, double& out) {
        if (const json* v = take(key)) {
            if (!v->is_number() || !std::isfinite(v->get<double>())) throw ParseError(at(key), "expected a finite number");
            out = v->get<double>();
        }
    }

    void number(const std::string& key, std::optional<double>& out) {
        if (has(key)) {
            double v = 0.0;
            number(key, v);
            out = v;
        }
    }

    template <typename Int>
    void count(const std::string& key, Int& out) {
        if (const json* v = take(key)) {
            if (!v->is_number_integer()) throw ParseError(at(key), "expected an integer");
            if (v->is_number_unsigned()) {
                out = static_cast<Int>(v->get<std::uint64_t>());
            } else {
                const auto s = v->get<std::int64_t>();
                if (s < 0) throw ParseError(at(key), "must be non-negative");
                out = static_cast<Int>(s);
            }
        }
    }

    void text(const std::string& key, std::string& out) {
        if (const json* v = take(key)) {
            if (!v->is_string()) throw ParseError(at(key), "expected a string");
            out = v->get<std::string>();
        }
    }

    void numbers(const std::string& key, std::vector<double>& out) {
        if (const json* v = take(key)) {
            if (!v->is_array()) throw ParseError(at(key), "expected an array of numbers");
            out.clear();
            for (std::size_t i = 0; i < v->size(); ++i) {
                const json& e = (*v)[i];
                if (!e.is_number()) throw ParseError(at(key) + "[" + std::to_string(i) + "]", "expected a number");
                out.push_back(e.get<double>());
            }
        }
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ParseError(at(it.key()), "unknown key");
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

void one_of(const std::string& path, const std::string& value, std::initializer_list<const char*> allowed) {
    for (const char* a : allowed)
        if (value == a) return;
    std::string list;
    for (const char* a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
    throw ParseError(path, "'" + value + "' is not one of " + list);
}

void parse_model(Object& root, ModelConfig& m) {
    const json* v = root.take("model");
    if (!v) return;
    Object o(*v, "model");
    o.text("name", m.name);
    if (m.name == "ou") {
        o.number("theta", m.theta);
        o.number("sigma", m.sigma);
    } else if (m.name == "sine") {
        o.number("a", m.a);
        o.number("c", m.c);
    } else if (m.name == "constant") {
        o.number("drift", m.drift);
        o.number("diffusion", m.diffusion);
    } else {
        throw UnknownName("model", m.name);
    }
    o.number("xi0", m.xi0);
    o.finish();
}

void parse_functional(Object& root, FunctionalConfig& f) {
    const json* v = root.take("functional");
    if (!v) return;
    Object o(*v, "functional");
    o.text("name", f.name);
    if (f.name == "point") {
        o.number("t", f.t);
    } else if (f.name == "product") {
        o.number("t1", f.t1);
        o.number("t2", f.t2);
    } else if (f.name == "integral") {
        o.text("g", f.g);
        smooth_scalar_by_name(f.g);
    } else if (f.name == "smooth_max") {
        o.number("beta", f.beta);
        if (!(f.beta > 0.0)) throw ParseError("functional.beta", "must be positive");
    } else if (f.name.empty()) {
        throw ParseError("functional.name", "missing");
    } else {
        throw UnknownName("functional", f.name);
    }
    o.finish();
}

}  // namespace

std::string to_string(Command c) {
    for (const auto& [k, name] : kCommands)
        if (k == c) return name;
    return "?";
}

Command command_from_string(const std::string& name) {
    for (const auto& [k, n] : kCommands)
        if (name == n) return k;
    throw UnknownName("command", name);
}

ExperimentConfig parse_config(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError("$", std::string("malformed document: ") + e.what());
    }
    ExperimentConfig cfg;
    Object root(doc, "");
    if (root.has("command")) {
        std::string c;
        root.text("command", c);
        cfg.command = command_from_string(c);
    }
    parse_model(root, cfg.model);
    parse_functional(root, cfg.functional);
    root.number("horizon", cfg.horizon);
    if (root.has("horizon") && !(cfg.horizon > 0.0)) throw ParseError("horizon", "must be positive");

    if (const json* v = root.take("grid")) {
        Object o(*v, "grid");
        o.numbers("ladder", cfg.grid.ladder);
        o.count("steps", cfg.grid.steps);
        o.count("coarse_steps", cfg.grid.coarse_steps);
        o.count("refinement", cfg.grid.refinement);
        o.count("quadrature", cfg.grid.quadrature);
        o.count("halvings", cfg.grid.halvings);
        o.finish();
    }
    if (const json* v = root.take("mollifier")) {
        Object o(*v, "mollifier");
        o.number("epsilon", cfg.epsilon);
        o.count("kernel_samples", cfg.kernel_samples);
        o.finish();
        if (cfg.epsilon < 0.0) throw ParseError("mollifier.epsilon", "must be non-negative");
    }
    if (const json* v = root.take("budget")) {
        Object o(*v, "budget");
        o.count("n_samples", cfg.budget.n_samples);
        o.count("n_inner", cfg.budget.n_inner);
        o.count("n_outer", cfg.budget.n_outer);
        o.number("cap", cfg.budget.cap);
        o.text("scale", cfg.budget.scale);
        o.finish();
        one_of("budget.scale", cfg.budget.scale, {"delta_squared", "constant"});
        if (!(cfg.budget.cap > 0.0)) throw ParseError("budget.cap", "must be positive");
    }
    root.count("seed", cfg.seed);
    if (const json* v = root.take("reference")) {
        Object o(*v, "reference");
        o.text("kind", cfg.reference);
        o.count("factor", cfg.reference_factor);
        o.finish();
        one_of("reference.kind", cfg.reference, {"closed_form", "fine_grid"});
    }
    root.numbers("times", cfg.times);
    root.text("fault", cfg.fault);
    one_of("fault", cfg.fault, {"none", "drop_half"});
    root.text("qv", cfg.qv);
    one_of("qv", cfg.qv, {"bracket", "realized"});
    if (const json* v = root.take("acceptance")) {
        Object o(*v, "acceptance");
        std::vector<double> rate{cfg.rate_lo, cfg.rate_hi};
        o.numbers("rate", rate);
        if (rate.size() != 2 || !(rate[0] < rate[1])) throw ParseError("acceptance.rate", "expected [lo, hi] with lo < hi");
        cfg.rate_lo = rate[0];
        cfg.rate_hi = rate[1];
        o.number("ratio", cfg.ratio_bound);
        o.finish();
    }
    root.text("out_dir", cfg.out_dir);
    root.finish();
    return cfg;
}

void finalize(ExperimentConfig& cfg, Command command) {
    if (cfg.command && *cfg.command != command)
        throw ParseError("command", "config is for '" + to_string(*cfg.command) + "', not '" + to_string(command) + "'");
    cfg.command = command;
    const bool nested = command == Command::KolmogorovCheck || command == Command::MartingaleCheck;

    if (cfg.horizon == 0.0) cfg.horizon = command == Command::ErrorRepresentation ? 0.25 : 1.0;
    const double T = cfg.horizon;
    auto& f = cfg.functional;
    if (f.name.empty()) f.name = command == Command::WeakRate || command == Command::GapStats ? "product" : "point";
    if (f.name == "point" && !f.t) f.t = T;
    if (f.name == "product") {
        if (!f.t1) f.t1 = command == Command::GapStats ? 0.3 * T : 0.5 * T;
        if (!f.t2) f.t2 = command == Command::GapStats ? 0.7 * T : T;
    }

    auto& g = cfg.grid;
    if (g.ladder.empty())
        g.ladder = command == Command::GapStats ? std::vector<double>{0.125, 0.03125} : default_ladder();
    for (std::size_t i = 0; i < g.ladder.size(); ++i) {
        if (!(g.ladder[i] > 0.0)) throw ParseError("grid.ladder[" + std::to_string(i) + "]", "must be positive");
        if (i > 0 && !(g.ladder[i] < g.ladder[i - 1])) throw ParseError("grid.ladder", "must strictly decrease");
    }
    if ((command == Command::WeakRate || command == Command::CovarianceBias) && g.ladder.size() < 3)
        throw ParseError("grid.ladder", "needs at least three rungs");
    if (g.steps == 0) g.steps = command == Command::ItoCheck ? 8 : 64;
    if (g.refinement == 0) g.refinement = 64;
    if (g.halvings < 1) throw ParseError("grid.halvings", "must be at least 1");

    auto& b = cfg.budget;
    if (b.n_samples == 0) {
        switch (command) {
            case Command::WeakRate:
            case Command::CovarianceBias: b.n_samples = 1000000; break;
            case Command::GapStats:
            case Command::ItoCheck: b.n_samples = 10000; break;
            case Command::MollifierAudit: b.n_samples = 1000; break;
            default: b.n_samples = 1; break;
        }
    }
    if (b.n_outer == 0) b.n_outer = command == Command::ErrorRepresentation ? 2000 : 1000;
    if (b.n_inner == 0) b.n_inner = command == Command::ErrorRepresentation ? 10 : 1000;
    if (b.n_samples < 2 && (command == Command::WeakRate || command == Command::CovarianceBias ||
                            command == Command::GapStats || command == Command::ItoCheck))
        throw ParseError("budget.n_samples", "must be at least 2");
    if ((nested || command == Command::ErrorRepresentation) && b.n_outer < 2)
        throw ParseError("budget.n_outer", "must be at least 2");

    if (cfg.times.empty()) {
        if (command == Command::KolmogorovCheck) cfg.times = {0.25 * T};
        if (command == Command::MartingaleCheck) cfg.times = {0.25 * T, 0.75 * T};
        if (command == Command::CovarianceBias) cfg.times = {0.5 * T, T};
    }
    const std::size_t want = command == Command::KolmogorovCheck ? 1
                             : (command == Command::MartingaleCheck || command == Command::CovarianceBias) ? 2
                                                                                                           : 0;
    if (want && cfg.times.size() != want) throw ParseError("times", "expected " + std::to_string(want) + " entries");
    for (std::size_t i = 0; i < cfg.times.size(); ++i)
        if (!(cfg.times[i] >= 0.0 && cfg.times[i] <= T))
            throw ParseError("times[" + std::to_string(i) + "]", "must lie in [0, horizon]");
    if (command == Command::CovarianceBias && cfg.model.name != "ou") throw ParseError("model.name", "covariance-bias needs the ou model");
    for (auto [v, key] : {std::pair{f.t, "functional.t"}, {f.t1, "functional.t1"}, {f.t2, "functional.t2"}})
        if (v && !(*v >= 0.0 && *v <= T)) throw ParseError(key, "must lie in [0, horizon]");
}

SdeModel build_model(const ExperimentConfig& cfg) {
    const auto& m = cfg.model;
    try {
        if (m.name == "ou") return ou_model(m.theta, m.sigma, m.xi0);
        if (m.name == "sine") return sine_model(m.a, m.c, m.xi0);
        if (m.name == "constant") return constant_model(m.drift, m.diffusion, m.xi0);
    } catch (const std::invalid_argument& e) {
        throw ParseError("model", e.what());
    }
    throw UnknownName("model", m.name);
}

PathFunctional build_functional(const ExperimentConfig& cfg) {
    const auto& f = cfg.functional;
    const double T = cfg.horizon > 0.0 ? cfg.horizon : 1.0;
    try {
        if (f.name == "point") return point_functional(f.t.value_or(T), T);
        if (f.name == "product") return product_functional(f.t1.value_or(0.5 * T), f.t2.value_or(T), T);
        if (f.name == "integral") return integral_functional(smooth_scalar_by_name(f.g));
        if (f.name == "smooth_max") return smooth_max_functional(f.beta);
    } catch (const std::invalid_argument& e) {
        throw ParseError("functional", e.what());
    }
    throw UnknownName("functional", f.name);
}

json ExperimentConfig::to_json() const {
    json j;
    if (command) j["command"] = to_string(*command);
    json m{{"name", model.name}, {"xi0", model.xi0}};
    if (model.name == "ou") {
        m["theta"] = model.theta;
        m["sigma"] = model.sigma;
    } else if (model.name == "sine") {
        m["a"] = model.a;
        m["c"] = model.c;
    } else {
        m["drift"] = model.drift;
        m["diffusion"] = model.diffusion;
    }
    j["model"] = m;
    json f{{"name", functional.name}};
    if (functional.t) f["t"] = *functional.t;
    if (functional.t1) f["t1"] = *functional.t1;
    if (functional.t2) f["t2"] = *functional.t2;
    if (functional.name == "integral") f["g"] = functional.g;
    if (functional.name == "smooth_max") f["beta"] = functional.beta;
    j["functional"] = f;
    j["horizon"] = horizon;
    j["grid"] = {{"ladder", grid.ladder},         {"steps", grid.steps},
                 {"coarse_steps", grid.coarse_steps}, {"refinement", grid.refinement},
                 {"quadrature", grid.quadrature}, {"halvings", grid.halvings}};
    j["mollifier"] = {{"epsilon", epsilon}, {"kernel_samples", kernel_samples}};
    j["budget"] = {{"n_samples", budget.n_samples}, {"n_inner", budget.n_inner}, {"n_outer", budget.n_outer},
                   {"cap", budget.cap},             {"scale", budget.scale}};
    j["seed"] = seed;
    j["reference"] = {{"kind", reference}, {"factor", reference_factor}};
    j["times"] = times;
    j["fault"] = fault;
    j["qv"] = qv;
    j["acceptance"] = {{"rate", {rate_lo, rate_hi}}, {"ratio", ratio_bound}};
    j["out_dir"] = out_dir;
    return j;
}

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace wpl
