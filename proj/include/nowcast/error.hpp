#pragma once

#include <stdexcept>
#include <string>

namespace nowcast {

/// Base class for every error the toolkit raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input file or raw grid could not be turned into a canonical field.
class IngestError : public Error {
 public:
  using Error::Error;
};

/// A crop or index window falls outside its source.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent parameters (sizes, parities, shapes).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A reduction was asked for with no (positively weighted) data.
class EmptyDataError : public Error {
 public:
  using Error::Error;
};

/// Score whose denominator vanishes, e.g. CSI with no events anywhere.
class UndefinedScoreError : public Error {
 public:
  using Error::Error;
};

class DegenerateVarianceError : public Error {
 public:
  using Error::Error;
};

class InvalidWeightError : public Error {
 public:
  using Error::Error;
};

class EnsembleTooSmallError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

class MaskedFrameError : public Error {
 public:
  using Error::Error;
};

class EstimationError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unsupported on-disk data (bad magic, truncated file...).
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

}  // namespace nowcast
