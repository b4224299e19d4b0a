#pragma once

#include <stdexcept>
#include <string>

namespace adain {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes that do not line up (channel mismatch, window larger than input, ...).
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid user-facing configuration: alpha out of range, bad weight sums, etc.
/// `field()` names the offending knob so front ends can report it.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

/// Violated API contract (e.g. backward() on a non-scalar).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf produced by a computation.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss during training or optimization.
class TrainingError : public NumericError {
 public:
  TrainingError(long iteration, std::string term, const std::string& what)
      : NumericError(what), iteration_(iteration), term_(std::move(term)) {}
  long iteration() const noexcept { return iteration_; }
  const std::string& term() const noexcept { return term_; }

 private:
  long iteration_;
  std::string term_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed weights bundle or descriptor file. `field()` names the
/// violated invariant (magic, version, offset, ...).
class FormatError : public Error {
 public:
  FormatError(std::string field, const std::string& what)
      : Error(what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Spatial masks whose binarized regions intersect.
class RegionOverlapError : public Error {
 public:
  RegionOverlapError(long positions, const std::string& what)
      : Error(what), positions_(positions) {}
  long positions() const noexcept { return positions_; }

 private:
  long positions_;
};

}  // namespace adain
