#include "fprune/errors.hpp"

namespace fprune {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kShape: return "shape_error";
    case ErrorCode::kConfig: return "config_error";
    case ErrorCode::kInput: return "input_error";
    case ErrorCode::kState: return "state_error";
    case ErrorCode::kValidation: return "validation_error";
    case ErrorCode::kConstraint: return "constraint_error";
    case ErrorCode::kRange: return "range_error";
    case ErrorCode::kBadMagic: return "bad_magic";
    case ErrorCode::kVersionMismatch: return "version_mismatch";
    case ErrorCode::kChecksum: return "checksum_error";
    case ErrorCode::kCountMismatch: return "count_mismatch";
    case ErrorCode::kIo: return "io_error";
    case ErrorCode::kNumeric: return "numeric_error";
  }
  return "error";
}

}  // namespace fprune
