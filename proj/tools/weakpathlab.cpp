#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "weakpathlab/errors.hpp"
#include "weakpathlab/runner.hpp"

namespace {

const char* const kCommands[] = {"weak-rate",        "covariance-bias", "gap-stats",
                                 "kolmogorov-check", "martingale-check", "ito-check",
                                 "error-representation", "mollifier-audit"};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Weak error experiments for path-dependent functionals of SDEs"};
    app.require_subcommand(1);
    app.set_version_flag("--version", WEAKPATHLAB_VERSION);

    std::string config;
    std::uint64_t seed = 0;
    std::string out;
    unsigned threads = 1;

    for (const char* name : kCommands) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config, "JSON experiment file")->required();
        sub->add_option("--seed", seed, "override the configured master seed");
        sub->add_option("--out", out, "override the output root");
        sub->add_option("--threads", threads, "worker threads; results do not depend on it")
            ->check(CLI::Range(1u, 1024u));
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(wpl::ExitCode::ConfigError);
    }

    const CLI::App* sub = app.get_subcommands().front();
    wpl::RunOptions options;
    options.threads = threads;
    if (sub->count("--seed")) options.seed = seed;
    if (sub->count("--out")) options.out_dir = out;

    const auto result = wpl::run_file(wpl::command_from_string(sub->get_name()), config, options, std::cout);
    return result.exit_status();
}
