#pragma once

#include <stdexcept>
#include <string>

namespace duodet {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad input: config values, malformed files, violated preconditions.
/// The CLI maps these to exit code 1.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Failure while doing otherwise valid work (I/O, diverging training).
/// The CLI maps these to exit code 2.
class RuntimeFailure : public Error {
public:
    using Error::Error;
};

}   // namespace duodet
