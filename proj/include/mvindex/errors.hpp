#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mvindex {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input text. Carries the source name and 1-based row/column.
class ParseError : public Error {
public:
    ParseError(std::string source, std::size_t row, std::size_t column, const std::string& what);

    const std::string& source() const noexcept { return source_; }
    std::size_t row() const noexcept { return row_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::string source_;
    std::size_t row_;
    std::size_t column_;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class ConfigurationError : public Error {
public:
    using Error::Error;
};

class InsufficientDataError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class ContractViolation : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

class SingularityError : public Error {
public:
    using Error::Error;
};

class InfeasibleError : public Error {
public:
    using Error::Error;
};

/// Maximum Sharpe is undefined: no positive excess return is attainable, or
/// the supremum is only approached with unbounded positions.
class UnboundedError : public Error {
public:
    using Error::Error;
};

class NonConvergenceError : public Error {
public:
    NonConvergenceError(const std::string& what, int iterations, double residual)
        : Error(what), iterations_(iterations), residual_(residual) {}

    int iterations() const noexcept { return iterations_; }
    double residual() const noexcept { return residual_; }

private:
    int iterations_;
    double residual_;
};

class SamplingError : public Error {
public:
    using Error::Error;
};

}  // namespace mvindex
