#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace heatlab {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid input parameters or configuration. CLI exit code 2.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Any failure of a numerical procedure. CLI exit code 3.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Rate graph splits into disconnected parts.
class StructuralError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Null space of the rate generator is not one-dimensional.
class DegeneracyError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Couplings that violate the assumptions of the linearized master equation.
class PathologicalCouplingError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class FitError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class IoError : public Error {
public:
    using Error::Error;
};

using WarningHandler = std::function<void(std::string_view)>;

/// Installs a process-wide warning sink and returns the previous one.
/// The default sink writes "heatlab: warning: ..." to stderr.
WarningHandler set_warning_handler(WarningHandler handler);

void warn(std::string_view message);

}  // namespace heatlab
