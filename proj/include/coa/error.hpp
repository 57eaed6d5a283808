#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace coa {

// Base class for all toolkit errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Bad input values, broken invariants, schema violations.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Remote endpoint unreachable after the configured retries.
class TransportError : public Error {
public:
    using Error::Error;
};

// Remote endpoint replied with something that does not parse as a verdict.
// Carries the raw payload for diagnosis; parse failures are never retried.
class ProtocolError : public Error {
public:
    ProtocolError(const std::string& what, std::string payload)
        : Error(what), payload_(std::move(payload)) {}

    const std::string& payload() const { return payload_; }

private:
    std::string payload_;
};

// A statistic whose defining formula degenerates: zero variance, empty or
// non-positive weight mass, single-class labels.
class DegenerateError : public Error {
public:
    using Error::Error;
};

}  // namespace coa
