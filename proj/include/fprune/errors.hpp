#pragma once

#include <stdexcept>
#include <string>

namespace fprune {

enum class ErrorCode {
  kShape,
  kConfig,
  kInput,
  kState,
  kValidation,
  kConstraint,
  kRange,
  kBadMagic,
  kVersionMismatch,
  kChecksum,
  kCountMismatch,
  kIo,
  kNumeric,
};

// Stable machine-readable name, e.g. "shape_error".
const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class ShapeError : public Error {
 public:
  ShapeError(std::string operand, const std::string& message)
      : Error(ErrorCode::kShape, operand + ": " + message),
        operand_(std::move(operand)) {}
  const std::string& operand() const noexcept { return operand_; }

 private:
  std::string operand_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& m) : Error(ErrorCode::kConfig, m) {}
};

class InputError : public Error {
 public:
  explicit InputError(const std::string& m) : Error(ErrorCode::kInput, m) {}
};

class StateError : public Error {
 public:
  explicit StateError(const std::string& m) : Error(ErrorCode::kState, m) {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& m)
      : Error(ErrorCode::kValidation, m) {}
};

class ConstraintError : public Error {
 public:
  explicit ConstraintError(const std::string& m)
      : Error(ErrorCode::kConstraint, m) {}
};

class RangeError : public Error {
 public:
  explicit RangeError(const std::string& m) : Error(ErrorCode::kRange, m) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& m) : Error(ErrorCode::kNumeric, m) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& m) : Error(ErrorCode::kIo, m) {}
};

// File-format failures. The code distinguishes bad magic, version mismatch,
// checksum failure and count mismatch.
class LoadError : public Error {
 public:
  LoadError(ErrorCode code, const std::string& m) : Error(code, m) {}
};

}  // namespace fprune
