#pragma once

#include <stdexcept>
#include <string>

namespace savers {

// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor/grid shapes do not satisfy an operation's contract.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration values (rates, counts, sizes, unknown keys).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A file does not conform to its declared format. Carries the byte
// offset at which parsing failed when one is meaningful.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& msg) : Error(msg), offset_(-1) {}
  FormatError(const std::string& msg, long long offset)
      : Error(msg + " (byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  long long offset() const { return offset_; }

 private:
  long long offset_;
};

// Data values out of range (labels, class indices).
class DataError : public Error {
 public:
  using Error::Error;
};

// Internal state inconsistency (stale pooling indices, mismatched
// parameter/velocity maps).
class CorruptionError : public Error {
 public:
  using Error::Error;
};

// Scene placement out of bounds or overlapping target masks.
class PlacementError : public Error {
 public:
  using Error::Error;
};

// Label-image creation found no pixel above threshold.
class EmptyMaskError : public Error {
 public:
  using Error::Error;
};

// Filesystem failures surfaced with the offending path.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace savers
