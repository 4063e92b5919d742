#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace levy_she {

// Parameter outside the region where a formula holds.
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

// Moment or kernel integral that is infinite, e.g. p >= 1 + 2/d.
struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    ConfigError(std::string path, const std::string& msg)
        : std::runtime_error(path.empty() ? msg : path + ": " + msg), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

  private:
    std::string path_;
};

// Non-finite field value during a run.
struct SimulationFault : std::runtime_error {
    SimulationFault(double time, const std::string& msg)
        : std::runtime_error(msg + " (t=" + std::to_string(time) + ")"), time_(time) {}
    double time() const noexcept { return time_; }

  private:
    double time_;
};

}  // namespace levy_she
