#pragma once

#include <stdexcept>
#include <string>

namespace krein {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// bad input: parameters outside their domain, malformed strings, non-accretive operators
class DomainError : public Error {
public:
  using Error::Error;
};

class PreconditionError : public DomainError {
public:
  using DomainError::DomainError;
};

class UnsupportedVariant : public DomainError {
public:
  using DomainError::DomainError;
};

// operator with a negative eigenvalue beyond tolerance
class AccretivityError : public DomainError {
public:
  using DomainError::DomainError;
};

class NumericError : public Error {
public:
  using Error::Error;
};

// requested tolerance not reached; estimate() is the best achieved bound
class ConvergenceError : public Error {
public:
  ConvergenceError(const std::string& what, double estimate)
      : Error(what), estimate_(estimate) {}
  double estimate() const noexcept { return estimate_; }

private:
  double estimate_;
};

class StatisticalFailure : public Error {
public:
  using Error::Error;
};

}  // namespace krein
