#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sae {

/// Base for every error raised by the library. Input problems derive from
/// ValidationError so the CLI can map them to a single exit status.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A required column or property could not be resolved.
class SchemaError : public ValidationError {
 public:
  SchemaError(const std::string& what, std::string column)
      : ValidationError(what), column_(std::move(column)) {}
  const std::string& column() const noexcept { return column_; }

 private:
  std::string column_;
};

/// A single input row (1-based, header excluded) failed an invariant.
class RowError : public ValidationError {
 public:
  RowError(const std::string& what, std::size_t row)
      : ValidationError(what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

/// A keyed entity (cluster, region, feature) is inconsistent with the rest.
class ConsistencyError : public ValidationError {
 public:
  ConsistencyError(const std::string& what, std::string key)
      : ValidationError(what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

class EmptyDatasetError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// The sampler produced a non-finite value.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, long iteration)
      : Error(what), iteration_(iteration) {}
  long iteration() const noexcept { return iteration_; }

 private:
  long iteration_;
};

}  // namespace sae
