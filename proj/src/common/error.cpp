#include "camd/common/error.h"

namespace camd {

TruncationError::TruncationError(std::size_t expected_bytes, std::size_t actual_bytes)
    : FormatError("truncated payload: expected " + std::to_string(expected_bytes) +
                  " bytes, got " + std::to_string(actual_bytes)),
      expected_(expected_bytes),
      actual_(actual_bytes) {}

}  // namespace camd
