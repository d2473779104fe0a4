#pragma once

#include <stdexcept>
#include <string>

namespace ptx {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// CSV header or cell cannot be parsed.
class SchemaError : public Error {
public:
  using Error::Error;
};

// A row violates the trial/target field-presence rule.
class ConsistencyError : public Error {
public:
  using Error::Error;
};

// Trial or target rows (or a trial arm) are missing entirely.
class EmptyPopulationError : public Error {
public:
  using Error::Error;
};

class DimensionError : public Error {
public:
  using Error::Error;
};

// Logistic MLE does not exist (single-class labels) or IRLS diverged.
class SeparationError : public Error {
public:
  using Error::Error;
};

// Normal equations / Hessian unusable even after ridge jitter.
class SingularError : public Error {
public:
  using Error::Error;
};

class FoldError : public Error {
public:
  using Error::Error;
};

class DegenerateDenominator : public Error {
public:
  using Error::Error;
};

class NonFiniteTerm : public Error {
public:
  using Error::Error;
};

class BootstrapError : public Error {
public:
  using Error::Error;
};

class BracketError : public Error {
public:
  using Error::Error;
};

class ScenarioError : public Error {
public:
  using Error::Error;
};

class DegenerateStratum : public Error {
public:
  using Error::Error;
};

}  // namespace ptx
