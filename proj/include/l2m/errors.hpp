#pragma once

#include <stdexcept>
#include <string>

namespace l2m {

// Error taxonomy. Everything derives from Error so callers can catch
// one base; the CLI maps ConfigError/UsageError to exit code 2 and the
// rest to exit code 1.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct DataError : Error {
    using Error::Error;
};

struct UsageError : Error {
    using Error::Error;
};

struct NumericError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

}  // namespace l2m
