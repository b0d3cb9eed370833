#pragma once

#include <stdexcept>
#include <string>

namespace rdlocal {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed or invalid input data (CSV parsing, schema validation).
class LoadError : public Error {
public:
    using Error::Error;
};

/// Invalid run configuration (bad mechanism spec, bad grid, bad DGP parameters).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Logistic MLE does not exist (complete or quasi-complete separation).
class SeparationError : public Error {
public:
    using Error::Error;
};

/// Assignment support too large to enumerate, or sampling budget exhausted.
class SupportError : public Error {
public:
    using Error::Error;
};

/// Estimation precondition failed (small arms, weak compliance, noncompliance violation).
class EstimationError : public Error {
public:
    using Error::Error;
};

} // namespace rdlocal
