#pragma once

#include <stdexcept>
#include <string>

namespace properfol {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A documented precondition was not met by the caller.
class ContractViolation : public Error {
public:
    using Error::Error;
};

/// Input outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

class DegenerateStateError : public Error {
public:
    using Error::Error;
};

class UnsupportedSpinError : public Error {
public:
    using Error::Error;
};

/// Raised when a spectral mode sits on (or too close to) the light cone,
/// where the gradient projector divides by q.q.
class SingularModeError : public Error {
public:
    SingularModeError(const std::string& what, double q0, double q1, double q2, double q3)
        : Error(what), q{q0, q1, q2, q3} {}
    double q[4];
};

class NearNullNormalError : public Error {
public:
    NearNullNormalError(const std::string& what, double ff) : Error(what), f_dot_f(ff) {}
    double f_dot_f;
};

/// |rho| dropped below the node threshold; the guidance law is singular.
class NodeError : public Error {
public:
    NodeError(const std::string& what, double rho_value) : Error(what), rho(rho_value) {}
    double rho;
};

class EnvelopeError : public Error {
public:
    using Error::Error;
};

} // namespace properfol
