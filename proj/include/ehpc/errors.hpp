#pragma once

#include <stdexcept>
#include <string>

namespace ehpc {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid argument or configuration value.
class ParameterError : public Error {
public:
    using Error::Error;
};

// Iterative numerics (root finding, quadrature) failed to reach tolerance.
class NumericError : public Error {
public:
    NumericError(const std::string& what, double last_value)
        : Error(what), last_value_(last_value) {}
    double last_value() const noexcept { return last_value_; }

private:
    double last_value_;
};

// A constructed stochastic model is not a valid probability model.
class ModelValidityError : public Error {
public:
    ModelValidityError(const std::string& what, int row, int col)
        : Error(what), row_(row), col_(col) {}
    int row() const noexcept { return row_; }
    int col() const noexcept { return col_; }

private:
    int row_;
    int col_;
};

// An action spends more energy than the battery holds.
class FeasibilityError : public Error {
public:
    using Error::Error;
};

// Value iteration or a dual loop failed to converge.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

// Problem too large for the configured memory budget.
class GuardError : public Error {
public:
    GuardError(const std::string& what, double state_count)
        : Error(what), state_count_(state_count) {}
    double state_count() const noexcept { return state_count_; }

private:
    double state_count_;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace ehpc
