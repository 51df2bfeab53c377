#pragma once

#include <stdexcept>
#include <string>

namespace wganc {

// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Operand shapes incompatible with an operation.
struct ShapeError : Error {
    using Error::Error;
};

// Invalid argument value (out-of-range index, bad lambda vector, ...).
struct ValueError : Error {
    using Error::Error;
};

// Non-finite value encountered during training; carries diagnostic context.
struct NumericError : Error {
    using Error::Error;
};

// Malformed or inconsistent run configuration.
struct ConfigError : Error {
    using Error::Error;
};

// File read/write failure.
struct IoError : Error {
    using Error::Error;
};

}  // namespace wganc
