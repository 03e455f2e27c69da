#pragma once

#include <stdexcept>
#include <string>

namespace selfen {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
    using Error::Error;
};

// Argument outside an operation's mathematical domain (e.g. exponent <= 0).
class DomainError : public Error {
 public:
    using Error::Error;
};

// Misuse of the autodiff graph: non-scalar loss, double backward, missing grads.
class GraphError : public Error {
 public:
    using Error::Error;
};

class IoError : public Error {
 public:
    using Error::Error;
};

class FormatError : public Error {
 public:
    using Error::Error;
};

class CorruptFileError : public FormatError {
 public:
    using FormatError::FormatError;
};

class VersionError : public FormatError {
 public:
    using FormatError::FormatError;
};

// Bad dataset contents: empty pools, images smaller than the patch, ...
class DataError : public Error {
 public:
    using Error::Error;
};

class ConfigError : public Error {
 public:
    using Error::Error;
};

}  // namespace selfen
