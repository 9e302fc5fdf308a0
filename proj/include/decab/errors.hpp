#pragma once

#include <stdexcept>
#include <string>

namespace decab {

/// Root of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed arguments: non-finite coordinates, wrong lengths, bad ids.
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// An argument lies outside the domain of a closed-form expression.
class DomainError : public Error {
public:
    using Error::Error;
};

/// The requested discretization violates an admissibility bound.
class Infeasible : public Error {
public:
    using Error::Error;
};

/// A stated precondition of a composite operation does not hold.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Numerical integration produced a non-finite value.
class IntegrationFailure : public Error {
public:
    using Error::Error;
};

/// A runtime monitor (input bound, containment) fired.
class MonitorViolation : public Error {
public:
    using Error::Error;
};

/// An enumeration exceeded its configured size cap.
class ResourceCap : public Error {
public:
    using Error::Error;
};

}  // namespace decab
