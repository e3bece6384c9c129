#pragma once

#include <stdexcept>
#include <string>

namespace dmf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Two operands live on different lattices (or windows).
class GridMismatch : public Error {
public:
    using Error::Error;
};

/// A precondition on values, supports or domains was violated.
class DomainError : public Error {
public:
    using Error::Error;
};

/// A configured cap (series length, product length, offset search) ran out
/// before the requested bound could be certified.
class NumericCapError : public Error {
public:
    using Error::Error;
};

} // namespace dmf
