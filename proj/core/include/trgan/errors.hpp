#pragma once

#include <stdexcept>
#include <string>

namespace trgan {

/// Base of every error raised by the workbench.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid or contradictory configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A value outside the range an operation accepts.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Mismatched grids, tensor shapes or collection sizes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Loss or metric became NaN/inf during optimisation.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, long step) : Error(what), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

/// A statistic that is undefined for the given input (empty mask, constant feature, ...).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// Volume/checkpoint/report file parsing failures.
class ParseError : public Error {
 public:
  enum class Kind { kMalformedHeader, kTruncatedPayload, kDimensionMismatch, kIo };
  ParseError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

}  // namespace trgan
