#pragma once

#include <stdexcept>
#include <string>

namespace gma {

/// Base class for everything thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Matrix shape or label inconsistency detected at construction time.
struct DimensionError : Error {
    using Error::Error;
};

/// The eigenvector matrix is too ill-conditioned to invert reliably, i.e. the
/// state matrix is numerically non-diagonalizable (repeated/defective modes).
struct NonDiagonalizableError : Error {
    using Error::Error;
};

/// A transfer function was evaluated within tolerance of a system pole.
struct PoleEvaluationError : Error {
    using Error::Error;
};

/// A residue or sensitivity was requested at an eigenvalue that is not simple.
struct NonSimpleModeError : Error {
    using Error::Error;
};

/// The requested mode is not both controllable and observable through the
/// selected ports, so the port-level quantity is undefined there.
struct PortCouplingError : Error {
    using Error::Error;
};

/// Static interconnection whose direct-feedthrough sum is singular; the bus
/// voltages cannot be eliminated and no state-space realization exists.
struct AlgebraicLoopError : Error {
    using Error::Error;
};

/// Rational fitting failed, diverged, or exceeded its error threshold.
struct FitError : Error {
    double rms;
    explicit FitError(const std::string& msg, double rms_value = 0.0)
        : Error(msg), rms(rms_value) {}
};

/// No fitted pole / system mode found in the requested window.
struct ModeNotFoundError : Error {
    using Error::Error;
};

/// A physically meaningless or inconsistent parameter value.
struct ParameterError : Error {
    using Error::Error;
};

/// Case file violates the schema; the message carries the JSON path.
struct CaseFormatError : Error {
    using Error::Error;
};

}  // namespace gma
