#pragma once

#include <stdexcept>
#include <string>

namespace pita {

/// File system or serialization failure (missing file, bad magic, short read).
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical breakdown carrying the step at which it was detected
/// (non-finite training loss, covariance losing positive definiteness).
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, long step)
        : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step_(step) {}

    long step() const { return step_; }

private:
    long step_;
};

}  // namespace pita
