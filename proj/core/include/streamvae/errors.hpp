#pragma once

#include <stdexcept>
#include <string>

namespace streamvae {

/// Base of every error thrown by the library. The CLI maps the concrete
/// subclasses onto process exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration or argument (exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed or unusable input data (exit code 3).
class DataError : public Error {
public:
    using Error::Error;
};

/// Non-finite values, divergence, failed fits (exit code 4).
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Tensor shape mismatch. Treated as a configuration problem by the CLI.
class ShapeError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

}  // namespace streamvae
