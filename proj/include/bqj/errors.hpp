#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace bqj {

/// Argument outside the domain of a formula (parameter inequality, singular set, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A vanishing denominator factor. `factor()` names the Pochhammer/theta factor.
class PoleError : public DomainError {
public:
    PoleError(const std::string& what, std::string factor)
        : DomainError(what + " [vanishing factor: " + factor + "]"), factor_(std::move(factor)) {}
    const std::string& factor() const noexcept { return factor_; }

private:
    std::string factor_;
};

/// A series or sum that fails to converge within its budget.
class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace bqj
