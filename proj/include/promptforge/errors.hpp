#pragma once

#include <stdexcept>
#include <string>

namespace promptforge {

// Base class for every failure the library reports deliberately.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad input data or a violated precondition.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Vectors of unequal dimension fed into a pairwise operation.
class DimensionMismatchError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// Operation requires a nonzero-norm vector.
class ZeroNormError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// Filesystem / serialization failure.
class IoError : public Error {
public:
    using Error::Error;
};

// Bad command line or missing required configuration.
class UsageError : public Error {
public:
    using Error::Error;
};

enum class ProviderErrorKind {
    auth,
    rate_limit,
    timeout,
    malformed,
    transport,
};

inline const char* to_string(ProviderErrorKind kind) {
    switch (kind) {
    case ProviderErrorKind::auth: return "auth";
    case ProviderErrorKind::rate_limit: return "rate_limit";
    case ProviderErrorKind::timeout: return "timeout";
    case ProviderErrorKind::malformed: return "malformed";
    case ProviderErrorKind::transport: return "transport";
    }
    return "unknown";
}

// Chat/embedding service failure. Transient kinds are eligible for retry,
// auth and malformed-request failures are not.
class ProviderError : public Error {
public:
    ProviderError(ProviderErrorKind kind, const std::string& message)
        : Error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ProviderErrorKind kind() const { return kind_; }

    bool transient() const {
        return kind_ == ProviderErrorKind::rate_limit || kind_ == ProviderErrorKind::timeout ||
               kind_ == ProviderErrorKind::transport;
    }

private:
    ProviderErrorKind kind_;
};

} // namespace promptforge
