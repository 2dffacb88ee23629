#pragma once

#include <stdexcept>
#include <string>

namespace msc {

// Bad input: shapes, preconditions, malformed files. CLI exit code 2.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// File-system and format failures while reading or writing caches.
class IoError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// Non-finite values, failed factorizations, degenerate statistics. CLI exit code 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace msc
