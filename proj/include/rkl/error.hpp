#pragma once

#include <stdexcept>
#include <string>

namespace rkl {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad shapes, out-of-range values, broken type invariants.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// The prior does not yield a finite marginal for the requested problem size.
class InvalidPrior : public Error {
public:
    using Error::Error;
};

/// Data for which an estimator is undefined (e.g. s^2 = 0).
class DegenerateData : public Error {
public:
    using Error::Error;
};

/// A requested posterior moment is infinite.
class MomentDivergent : public Error {
public:
    using Error::Error;
};

/// closed_form requested for a prior/functional pair without one.
class MethodUnavailable : public Error {
public:
    using Error::Error;
};

/// Posterior risk is infinite for every candidate estimate.
class RiskDivergent : public Error {
public:
    using Error::Error;
};

class OptimizerFailed : public Error {
public:
    using Error::Error;
};

/// File system and parse failures; the message carries the path.
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace rkl
