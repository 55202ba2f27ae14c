#pragma once

#include <stdexcept>
#include <string>

namespace rfc {

/// Argument outside the mathematical domain of an operation (negative radius,
/// non-positive growth rate, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A precondition on a structured argument does not hold (e.g. a function that
/// is required to be class K-infinity is not).
class ContractError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Inverse requested below the range of a monotone function.
class BelowRangeError : public DomainError {
public:
    using DomainError::DomainError;
};

/// L^p norm requested for a signal without compact support.
class UnsupportedSignalError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Vector field produced a non-finite value.
class ModelError : public std::runtime_error {
public:
    ModelError(const std::string& what, double time)
        : std::runtime_error(what), time_(time) {}
    double time() const noexcept { return time_; }

private:
    double time_;
};

/// A flow value was requested past the end of the maximal interval of existence.
class MaximalIntervalError : public std::runtime_error {
public:
    MaximalIntervalError(const std::string& what, double t_esc)
        : std::runtime_error(what), t_esc_(t_esc) {}
    double t_esc() const noexcept { return t_esc_; }

private:
    double t_esc_;
};

}  // namespace rfc
