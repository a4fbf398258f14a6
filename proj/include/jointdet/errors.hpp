#pragma once

#include <stdexcept>
#include <string>

namespace jointdet {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration values (mixup parameters, detector shape, training setup).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Bad arguments to an operation: shape mismatch, degenerate box, out-of-range index.
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// Non-finite values encountered in a loss or feature map.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Manifest or checkpoint could not be parsed or does not validate.
class LoadError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace jointdet
