#pragma once

#include <stdexcept>
#include <string>

namespace ricci {

/// Base class for all failures raised by the library.  Every error carries a
/// human-readable message naming the offending quantity or field.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A warp profile violates an admissibility requirement (pole values, interior
/// positivity, grid monotonicity, pole slope, ...).
class InvalidProfile : public Error {
public:
    using Error::Error;
};

/// Geometry degenerated below the resolvable floor (e.g. the warp factor
/// collapsed at an interior point: a neck pinch).
class SingularData : public Error {
public:
    using Error::Error;
};

/// A query lies outside the available data or violates a scale precondition.
class OutOfRange : public Error {
public:
    using Error::Error;
};

/// A scenario configuration could not be parsed or validated.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// An iterative computation failed to meet its convergence target.
class NotConverged : public Error {
public:
    using Error::Error;
};

/// The time step fell below the configured minimum.
class StepUnderflow : public Error {
public:
    using Error::Error;
};

} // namespace ricci
