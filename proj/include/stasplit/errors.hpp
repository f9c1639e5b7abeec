#pragma once

#include <stdexcept>
#include <string>

namespace stasplit {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad user input: malformed config, out-of-range parameters. CLI exit code 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

// A solver could not produce a trustworthy answer. CLI exit code 3.
class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace stasplit
