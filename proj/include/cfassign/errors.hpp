#pragma once

#include <stdexcept>
#include <string>

namespace cfa {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidLayoutError : public Error {
 public:
  using Error::Error;
};

class DegenerateGeometryError : public Error {
 public:
  using Error::Error;
};

class InvalidScenarioError : public Error {
 public:
  using Error::Error;
};

/// Malformed or truncated file.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// File written by a newer (or unknown) schema version.
class VersionError : public SchemaError {
 public:
  using SchemaError::SchemaError;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf encountered in a value or gradient.
class NumericsError : public Error {
 public:
  using Error::Error;
};

/// The constraint set admits no feasible assignment (K*L > N*U).
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

class PhaseError : public Error {
 public:
  using Error::Error;
};

}  // namespace cfa
