#pragma once

#include <stdexcept>
#include <string>

namespace lignn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input record. Carries the 1-based line (text) or byte offset (binary).
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t location)
        : Error(what + " (at " + std::to_string(location) + ")"), location_(location) {}

    std::size_t location() const noexcept { return location_; }

private:
    std::size_t location_;
};

class BoundsError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class AlignmentError : public Error {
public:
    using Error::Error;
};

}  // namespace lignn
