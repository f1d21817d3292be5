#pragma once

#include <stdexcept>
#include <string>

namespace fockfringe {

// Base class for every error raised by the library. The CLI maps the
// concrete subclasses onto exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// An argument lies outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

// A Fock state or distribution exceeds the supported atom-number cap.
class CapacityError : public Error {
public:
    using Error::Error;
};

// The input carries no information for the requested quantity
// (all weight on empty sites, zero atoms, every point low-signal).
class DegenerateError : public Error {
public:
    using Error::Error;
};

// Too few samples, points, or curves for the requested estimate.
class ArityError : public Error {
public:
    using Error::Error;
};

class NoCrossingError : public Error {
public:
    using Error::Error;
};

class AmbiguousCrossingError : public Error {
public:
    using Error::Error;
};

// Malformed input text (CSV, config). The message names file and line.
class ParseError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace fockfringe
