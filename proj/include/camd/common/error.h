#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace camd {

// Shapes of two operands (or an operand and a parameter) do not agree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A sliding-window operation would produce an empty output.
class DegenerateLengthError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// NaN or infinity where finite values are required.
class NumericInputError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Class label outside [0, K).
class LabelError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Misuse of an API contract (non-scalar backward root, missing tape, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Invalid user-facing configuration: unknown keys, bad values, unsupported schemes.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Binary file format errors. Subclasses are distinct so callers can tell them apart.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MagicError : public FormatError {
 public:
  using FormatError::FormatError;
};

class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

class TruncationError : public FormatError {
 public:
  TruncationError(std::size_t expected_bytes, std::size_t actual_bytes);

  std::size_t expected_bytes() const { return expected_; }
  std::size_t actual_bytes() const { return actual_; }

 private:
  std::size_t expected_;
  std::size_t actual_;
};

// A (label, SNR) stratum is too small to split 6:2:2.
class StratumError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A file could not be opened, written or read.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace camd
