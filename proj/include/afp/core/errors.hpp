#pragma once

#include <stdexcept>
#include <string>

namespace afp {

// Error taxonomy mirrors the CLI exit codes: config/usage problems,
// missing stage dependencies, and runtime failures.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class InputError : public std::runtime_error {
public:
    explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

class DependencyError : public std::runtime_error {
public:
    explicit DependencyError(const std::string& msg) : std::runtime_error(msg) {}
};

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised by the IK solver when it cannot reach a target; carries the best
// residual achieved so callers can report how close it got.
class UnreachableTargetError : public std::runtime_error {
public:
    UnreachableTargetError(const std::string& msg, double best_residual)
        : std::runtime_error(msg), best_residual_(best_residual) {}
    double best_residual() const { return best_residual_; }

private:
    double best_residual_;
};

}  // namespace afp
