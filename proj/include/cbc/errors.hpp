#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cbc {

/// A parameter violates a documented invariant (non-positive gain, epsilon out of range, ...).
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed configuration text.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// A state component became NaN or infinite during time integration.
class NonFiniteError : public std::runtime_error {
public:
    NonFiniteError(double t, const std::string& what)
        : std::runtime_error(what + " (t = " + std::to_string(t) + ")"), time_(t) {}

    [[nodiscard]] double time() const noexcept { return time_; }

private:
    double time_;
};

/// The arclength circle does not cross the branch of limit cycles.
class EmptyIntersection : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// 2*eps*f1a - Kd1 vanishes, the perturbative eigenvalue expansion is undefined.
class DegenerateDenominator : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

}  // namespace cbc
