#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace meshseq {

// Stable codes; the scripting bindings surface these verbatim.
enum class ErrorCode : int {
  kMalformedRecord = 1,
  kIndexOutOfRange = 2,
  kEmptyMesh = 3,
  kInvalidMesh = 4,
  kDegenerateBounds = 5,
  kOutOfRange = 6,
  kAllFacesDegenerate = 7,
  kNonCanonical = 8,
  kTooManyFaces = 9,
  kUnsupportedFace = 10,
  kMalformedSequence = 11,
  kIo = 12,
  kBadFormat = 13,
  kInvalidArgument = 14,
  kNonFiniteLoss = 15,
  kEmptyInput = 16,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace meshseq
