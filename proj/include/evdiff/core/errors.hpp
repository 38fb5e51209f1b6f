#pragma once

#include <stdexcept>
#include <string>

namespace evdiff {

/// Base class for every error this library raises on purpose.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Tensor/operand shapes do not conform.
struct DimensionError : Error {
  using Error::Error;
};

/// A configuration value violates a module precondition.
struct ConfigError : Error {
  using Error::Error;
};

/// Ingested data violates the data model (non-monotone times, bad marks, ...).
struct ValidationError : Error {
  using Error::Error;
};

/// An index (mark, diffusion level, label) is out of range.
struct IndexError : Error {
  using Error::Error;
};

/// A NaN/Inf appeared in a forward or backward pass; the step must abort.
struct NumericError : Error {
  using Error::Error;
};

/// An API contract was violated by the caller (e.g. backward on a non-scalar).
struct ContractError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace evdiff
