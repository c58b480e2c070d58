#pragma once

#include <stdexcept>
#include <string>

namespace sdnn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Incompatible tensor extents passed to an operation.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Invalid argument or configuration value.
class ValueError : public Error {
public:
    using Error::Error;
};

} // namespace sdnn
