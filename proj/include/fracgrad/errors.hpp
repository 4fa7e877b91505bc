#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace fracgrad {

// Base of every error the library throws. Callers that only care about
// "something in fracgrad failed" can catch this.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain (gamma of x <= 0, NaN weights).
class DomainError : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

/// Operation invoked on an object that is not in a usable state
/// (empty history window, stale forward cache).
class StateError : public Error {
public:
    using Error::Error;
};

/// Request beyond what a component supports (derivative order too high).
class CapabilityError : public Error {
public:
    using Error::Error;
};

class ArgumentError : public Error {
public:
    using Error::Error;
};

/// Non-finite value produced during an iterative computation.
class NumericError : public Error {
public:
    NumericError(const std::string& what, std::size_t iteration)
        : Error(what + " (iteration " + std::to_string(iteration) + ")"), iteration_(iteration) {}

    std::size_t iteration() const noexcept { return iteration_; }

private:
    std::size_t iteration_;
};

/// Iterate norm exceeded the divergence guard. Carries the last finite iterate.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, std::size_t iteration, std::vector<double> last_finite)
        : Error(what), iteration_(iteration), last_finite_(std::move(last_finite)) {}

    std::size_t iteration() const noexcept { return iteration_; }
    const std::vector<double>& last_finite() const noexcept { return last_finite_; }

private:
    std::size_t iteration_;
    std::vector<double> last_finite_;
};

class IngestionError : public Error {
public:
    IngestionError(const std::string& what, std::vector<std::size_t> rows)
        : Error(what), rows_(std::move(rows)) {}

    /// Zero-based manifest data rows (header excluded) that failed.
    const std::vector<std::size_t>& rows() const noexcept { return rows_; }

private:
    std::vector<std::size_t> rows_;
};

class FormatError : public Error {
public:
    using Error::Error;
};

} // namespace fracgrad
