#pragma once

#include <stdexcept>
#include <string>

namespace stpf {

/// Base class for every failure raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent configuration (CLI exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Missing, malformed or unreadable input data (CLI exit code 3).
class DataError : public Error {
public:
    using Error::Error;
};

/// Non-finite loss or parameter during training (CLI exit code 4).
class NumericError : public Error {
public:
    using Error::Error;
};

/// Tensor or feature shapes that do not line up.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Points behind the camera, non-positive disparity or depth.
class GeometryError : public Error {
public:
    using Error::Error;
};

}  // namespace stpf
