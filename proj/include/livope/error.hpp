#ifndef LIVOPE_ERROR_HPP
#define LIVOPE_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace livope {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration value (discount outside (0,1), negative sizes, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Dataset content violates an invariant.
class DatasetError : public Error {
public:
    using Error::Error;
};

/// Malformed episode file; carries the 1-based line number.
class ParseError : public DatasetError {
public:
    ParseError(std::size_t line, const std::string& what)
        : DatasetError("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// A numeric precondition failed (value outside [-1, 1], non-finite loss, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

} // namespace livope

#endif
