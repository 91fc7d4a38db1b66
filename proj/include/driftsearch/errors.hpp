#pragma once

#include <stdexcept>
#include <string>

namespace driftsearch {

/// Raised for malformed or inconsistent scenario input.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when the potential solve fails to converge. Carries the last
/// relative residual so callers can report how far off the solve was.
class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, double residual, int iterations)
        : std::runtime_error(what), residual(residual), iterations(iterations) {}

    double residual = 0.0;
    int iterations = 0;
};

/// Raised for unreadable or malformed field/flow files.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace driftsearch
