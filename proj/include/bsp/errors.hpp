#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bsp {

/// Malformed input text; carries the 1-based line number of the offending row.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& message, std::size_t line)
        : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Inputs that are well-formed but inconsistent with the requested operation.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Factorization failure inside a recursion; `step()` is the 0-based time index.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& message, std::size_t step)
        : std::runtime_error(message + " (time step " + std::to_string(step) + ")"), step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

class EstimationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace bsp
