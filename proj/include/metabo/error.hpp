#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace metabo {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A parameter value or reduced range falls outside the allowed bounds.
class BoundsError : public Error {
public:
    BoundsError(const std::string& parameter, const std::string& what)
        : Error("parameter '" + parameter + "': " + what), parameter_(parameter) {}

    const std::string& parameter() const noexcept { return parameter_; }

private:
    std::string parameter_;
};

/// A requested entry does not exist. Distinct from I/O failures.
class NotFound : public Error {
public:
    using Error::Error;
};

/// Malformed text input. `line()` is 1-based, 0 when unknown.
class ParseError : public Error {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : Error(source + (line > 0 ? ":" + std::to_string(line) : std::string()) + ": " + what),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class InsufficientData : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace metabo
