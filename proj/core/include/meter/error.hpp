#pragma once

#include <stdexcept>
#include <string>

namespace meter {

// Base for every error raised by the library. Subclasses map onto the
// categories the CLI turns into exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dimension mismatch between operands.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of a function.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Violated precondition (empty input, wrong call order, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Training could not make progress (e.g. no confident pseudo labels).
class TrainingError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or unreadable input data.
class DataError : public Error {
 public:
  using Error::Error;
};

class MetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace meter
