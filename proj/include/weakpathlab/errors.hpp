#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace wpl {

// Invalid arguments and out-of-range times use std::invalid_argument and
// std::out_of_range. The types below cover the remaining failure modes.

class NumericalOverflow : public std::runtime_error {
public:
    NumericalOverflow(const std::string& what, std::size_t step)
        : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

class ResolutionTooCoarse : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class InsufficientSignal : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class BudgetExceeded : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& path, const std::string& message)
        : std::runtime_error(path + ": " + message), path_(path) {}

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

class UnknownName : public std::runtime_error {
public:
    UnknownName(const std::string& kind, const std::string& name)
        : std::runtime_error("unknown " + kind + " '" + name + "'"), name_(name) {}

    const std::string& name() const noexcept { return name_; }

private:
    std::string name_;
};

}  // namespace wpl
