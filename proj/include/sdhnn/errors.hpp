#pragma once

#include <stdexcept>
#include <string>

namespace sdhnn {

/// Base class for every error raised by the library. The CLI maps the
/// subclasses onto process exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid parameters, misaligned grids, malformed input files (exit 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Evaluation requested outside a function's domain.
class DomainError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

/// Numerical blow-up during integration (exit 3).
class DivergenceError : public Error {
public:
    using Error::Error;
};

/// The sampled linear flow became numerically singular (exit 3).
class FlowDegenerateError : public DivergenceError {
public:
    using DivergenceError::DivergenceError;
};

/// Analysis could not produce a result: empty spectrum, unstable
/// linearization, violated preconditions of a bound (exit 4).
class AnalysisError : public Error {
public:
    using Error::Error;
};

class EmptySpectrumError : public AnalysisError {
public:
    using AnalysisError::AnalysisError;
};

class UnstableLinearizationError : public AnalysisError {
public:
    using AnalysisError::AnalysisError;
};

class ConditionNotSatisfiedError : public AnalysisError {
public:
    using AnalysisError::AnalysisError;
};

} // namespace sdhnn
