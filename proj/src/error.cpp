#include "vfmv/error.hpp"

namespace vfmv {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DuplicateView: return "DuplicateView";
    case ErrorCode::MissingView: return "MissingView";
    case ErrorCode::ResolutionMismatch: return "ResolutionMismatch";
    case ErrorCode::DanglingPlaneRef: return "DanglingPlaneRef";
    case ErrorCode::PlaneOrderViolation: return "PlaneOrderViolation";
    case ErrorCode::ViewOutOfGrid: return "ViewOutOfGrid";
    case ErrorCode::InvalidPlane: return "InvalidPlane";
    case ErrorCode::NonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::WindowTooLarge: return "WindowTooLarge";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::Diverged: return "Diverged";
    case ErrorCode::SingularHomography: return "SingularHomography";
    case ErrorCode::ImageTooSmall: return "ImageTooSmall";
    case ErrorCode::WindowOutOfBounds: return "WindowOutOfBounds";
    case ErrorCode::InsufficientMatches: return "InsufficientMatches";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::AmbiguousPose: return "AmbiguousPose";
    case ErrorCode::NoCorrespondences: return "NoCorrespondences";
    case ErrorCode::Io: return "IoError";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidDataset: return "InvalidDataset";
  }
  return "Unknown";
}

}  // namespace vfmv
