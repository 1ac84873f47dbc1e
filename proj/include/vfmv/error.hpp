#pragma once

#include <stdexcept>
#include <string>

namespace vfmv {

enum class ErrorCode {
  InvalidArgument,
  DuplicateView,
  MissingView,
  ResolutionMismatch,
  DanglingPlaneRef,
  PlaneOrderViolation,
  ViewOutOfGrid,
  InvalidPlane,
  NonPositiveDepth,
  WindowTooLarge,
  DegenerateInput,
  Diverged,
  SingularHomography,
  ImageTooSmall,
  WindowOutOfBounds,
  InsufficientMatches,
  DegenerateConfiguration,
  AmbiguousPose,
  NoCorrespondences,
  Io,
  InvalidConfig,
  InvalidDataset,
};

const char* to_string(ErrorCode code);

// Every failure raised by the library carries a machine-checkable code and a
// message naming the offending item, e.g. "MissingView(8,8)".
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace vfmv
