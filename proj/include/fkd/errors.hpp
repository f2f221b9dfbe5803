#pragma once

#include <stdexcept>
#include <string>

namespace fkd {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Source could not be read, or its contents violate the schema invariants.
class LoadError : public Error {
public:
    using Error::Error;
};

// A ColumnRef, table name or pair does not resolve against the database.
class ResolveError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Backend transport failure or missing scripted entry.
class GatewayError : public Error {
public:
    using Error::Error;
};

// Model output does not satisfy the response schema of its prompt kind.
class ParseError : public Error {
public:
    using Error::Error;
};

} // namespace fkd

namespace fkd {

// Retryable transport failure (network error, HTTP 429/5xx).
class TransientGatewayError : public GatewayError {
public:
    using GatewayError::GatewayError;
};

} // namespace fkd
