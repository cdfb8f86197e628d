#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace qcd {

// Invalid scenario / experiment parameters. Carries every problem found so
// callers can print full schema diagnostics in one go.
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(const std::string& what)
        : std::invalid_argument(what), problems_{what} {}
    explicit ConfigError(std::vector<std::string> problems)
        : std::invalid_argument(join(problems)), problems_(std::move(problems)) {}

    const std::vector<std::string>& problems() const noexcept { return problems_; }

private:
    static std::string join(const std::vector<std::string>& items) {
        std::string out;
        for (const auto& s : items) {
            if (!out.empty()) out += "; ";
            out += s;
        }
        return out;
    }

    std::vector<std::string> problems_;
};

// Argument outside the support / open interval a function is defined on.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// A statistic or increment became NaN/inf during a run.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Monte Carlo estimate could not be formed (all runs truncated, no bracket).
class EstimationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Observation tuple violating its own invariants.
class MalformedObservation : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace qcd
