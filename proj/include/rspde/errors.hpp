#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rspde {

// Invalid input data or a violated structural hypothesis (wall ordering,
// coefficient monotonicity, parameter ranges).
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// An iterative solver exhausted its budget before reaching tolerance.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double last_residual = 0.0)
        : std::runtime_error(what), last_residual_(last_residual) {}

    double last_residual() const { return last_residual_; }

private:
    double last_residual_;
};

// Malformed expression or configuration text.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t position = 0)
        : std::runtime_error(what), position_(position) {}

    std::size_t position() const { return position_; }

private:
    std::size_t position_;
};

}  // namespace rspde
