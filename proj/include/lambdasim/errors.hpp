#pragma once

#include <stdexcept>
#include <string>

namespace lambdasim {

// Raised when a fixed-step solver fails one of its internal quality checks
// (norm conservation, step-halving agreement, quadrature convergence).
class IntegratorError : public std::runtime_error {
public:
    explicit IntegratorError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised by the ratio-equation solver when |r| or |rho| crosses the blow-up
// threshold. That happens whenever the reference amplitude b1 nearly
// depletes, so the failure time is part of the diagnostic.
class SingularityError : public std::runtime_error {
public:
    SingularityError(const std::string& msg, double t_cycles)
        : std::runtime_error(msg), t_cycles_(t_cycles) {}

    double t_cycles() const { return t_cycles_; }

private:
    double t_cycles_;
};

// Raised when a scenario file or CLI request cannot be mapped onto the
// library types (unknown keys, bad enum strings, missing fields).
class ScenarioError : public std::runtime_error {
public:
    explicit ScenarioError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace lambdasim
