#include "meshseq/error.hpp"

namespace meshseq {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedRecord: return "malformed_record";
    case ErrorCode::kIndexOutOfRange: return "index_out_of_range";
    case ErrorCode::kEmptyMesh: return "empty_mesh";
    case ErrorCode::kInvalidMesh: return "invalid_mesh";
    case ErrorCode::kDegenerateBounds: return "degenerate_bounds";
    case ErrorCode::kOutOfRange: return "out_of_range";
    case ErrorCode::kAllFacesDegenerate: return "all_faces_degenerate";
    case ErrorCode::kNonCanonical: return "non_canonical";
    case ErrorCode::kTooManyFaces: return "too_many_faces";
    case ErrorCode::kUnsupportedFace: return "unsupported_face";
    case ErrorCode::kMalformedSequence: return "malformed_sequence";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kBadFormat: return "bad_format";
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kNonFiniteLoss: return "non_finite_loss";
    case ErrorCode::kEmptyInput: return "empty_input";
  }
  return "unknown";
}

}  // namespace meshseq
