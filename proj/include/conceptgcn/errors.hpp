#pragma once

#include <stdexcept>
#include <string>

namespace conceptgcn {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Operand shapes do not conform.
class DimensionError : public Error {
public:
    using Error::Error;
};

// A caller violated a documented precondition.
class ContractError : public Error {
public:
    using Error::Error;
};

// Invalid hyperparameter or configuration value.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Malformed dataset text.
class ParseError : public Error {
public:
    using Error::Error;
};

// JSON document does not match the expected layout.
class SchemaError : public Error {
public:
    using Error::Error;
};

// NaN/Inf produced where finite values are required.
class NumericError : public Error {
public:
    using Error::Error;
};

// Labels cannot be partitioned as requested.
class SplitError : public Error {
public:
    using Error::Error;
};

}  // namespace conceptgcn
