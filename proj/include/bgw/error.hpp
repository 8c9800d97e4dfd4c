#pragma once

#include <stdexcept>
#include <string>

namespace bgw {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Argument outside the domain of a function, e.g. a p.g.f. evaluated at v > 1.
class DomainError : public Error {
public:
    using Error::Error;
};

// Violated input requirement that is not a regime question.
class PreconditionError : public Error {
public:
    using Error::Error;
};

// The requested quantity is outside the regime where the formulas hold.
// `inequality` names the violated condition, e.g. "phi_q > varphi".
class UnsupportedRegime : public Error {
public:
    UnsupportedRegime(std::string inequality, const std::string& detail = {})
        : Error(detail.empty() ? inequality : inequality + ": " + detail),
          inequality_(std::move(inequality)) {}

    const std::string& inequality() const noexcept { return inequality_; }

private:
    std::string inequality_;
};

class NonConvergence : public Error {
public:
    NonConvergence(const std::string& what, double estimate, double error)
        : Error(what), estimate_(estimate), error_(error) {}

    double estimate() const noexcept { return estimate_; }
    double achieved_error() const noexcept { return error_; }

private:
    double estimate_;
    double error_;
};

} // namespace bgw
