#pragma once

#include <stdexcept>
#include <string>

namespace pdeid {

// Base for every error raised by the toolkit. The CLI maps the subclasses
// onto distinct exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

// Requested window or index lies outside the available data.
class RangeError : public Error {
public:
    using Error::Error;
};

// Iterative solver or linear algebra failure.
class NumericError : public Error {
public:
    using Error::Error;
};

class SolverError : public NumericError {
public:
    using NumericError::NumericError;
};

class IllConditionedError : public NumericError {
public:
    using NumericError::NumericError;
};

class DegenerateFitError : public NumericError {
public:
    using NumericError::NumericError;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Command invoked without the inputs it needs.
class UsageError : public Error {
public:
    using Error::Error;
};

}  // namespace pdeid
