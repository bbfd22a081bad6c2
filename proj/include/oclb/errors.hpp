#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace oclb {

/// Root of every error the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller violated an operation's precondition (bad dims, bad parameter).
class ContractError : public Error {
public:
    using Error::Error;
};

/// Input data is malformed or non-finite.
class DataError : public Error {
public:
    using Error::Error;
};

/// Tensor record has a bad magic, version, rank or checksum.
class FormatError : public DataError {
public:
    using DataError::DataError;
};

/// Tensor record payload is shorter than its header promises.
class TruncationError : public DataError {
public:
    using DataError::DataError;
};

/// Operation is undefined in the current state (e.g. predict before observe).
class StateError : public Error {
public:
    using Error::Error;
};

/// Undefined arithmetic, e.g. a gain relative to a perfect baseline.
class UndefinedError : public Error {
public:
    using Error::Error;
};

/// Factorization broke down. `pivot()` is the offending diagonal index.
class NumericError : public Error {
public:
    NumericError(const std::string& what, std::size_t pivot);
    std::size_t pivot() const noexcept { return pivot_; }

private:
    std::size_t pivot_;
};

/// Experiment configuration could not be parsed or validated.
class ConfigError : public Error {
public:
    ConfigError(const std::string& what, std::size_t line = 0);
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace oclb
