#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "weakpathlab/config.hpp"

namespace wpl {

enum class ExitCode : int {
    Passed = 0,
    CheckFailed = 1,
    InsufficientSignal = 2,
    BudgetExceeded = 3,
    ConfigError = 4,
    NumericalError = 5,
};

std::string reason(ExitCode c);

struct CheckResult {
    std::string check;
    double value = 0.0;
    double std_error = 0.0;
    nlohmann::json tolerance;  // number, or [lo, hi]
    bool passed = false;
};

struct RunOptions {
    unsigned threads = 1;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
};

struct RunResult {
    ExitCode code = ExitCode::Passed;
    std::string message;
    std::filesystem::path run_dir;
    std::vector<CheckResult> checks;

    int exit_status() const { return static_cast<int>(code); }
};

/// Runs one experiment and writes <out>/run-NNNN/{manifest.json, report.json, results.csv}.
/// Prints one line per check and a final reason= line to `log`. Never throws
/// for configuration or numerical problems; those map to exit codes.
RunResult run(Command command, ExperimentConfig cfg, const RunOptions& options, std::ostream& log);

/// Reads the file, parses it and runs; a missing or unreadable file is a config error.
RunResult run_file(Command command, const std::filesystem::path& config, const RunOptions& options,
                   std::ostream& log);

}  // namespace wpl
