#pragma once

#include <stdexcept>
#include <string>

namespace afacta {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed domain values (bad GuidelineAnswer, wrong verdict set, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

// A model reply that could not be mapped to a stance. Carries the raw text.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::string raw)
        : Error(what), raw_(std::move(raw)) {}
    const std::string& raw() const noexcept { return raw_; }

private:
    std::string raw_;
};

class TransportError : public Error {
public:
    using Error::Error;
};

class CacheMissError : public Error {
public:
    CacheMissError(const std::string& what, std::string hash)
        : Error(what), hash_(std::move(hash)) {}
    const std::string& hash() const noexcept { return hash_; }

private:
    std::string hash_;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Bad input files: corpus gaps, unaligned ids, unknown records.
class DataError : public Error {
public:
    using Error::Error;
};

// Argument outside a function's mathematical domain (p <= 0, empty sets).
class DomainError : public Error {
public:
    using Error::Error;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

class ConflictError : public Error {
public:
    using Error::Error;
};

}  // namespace afacta
