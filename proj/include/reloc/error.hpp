#pragma once

#include <stdexcept>
#include <string>

namespace reloc {

enum class ErrorCode {
  invalid_input,
  behind_camera,
  empty_input,
  insufficient_matches,
  empty_instance,
  degenerate_sample,
  invalid_essential,
  estimation_failed,
  cheirality_failed,
  no_depth_overlap,
  scale_failed,
  unrenderable_scene,
  io_error,
  format_error,
  malformed_submission,
};

inline const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::invalid_input: return "invalid_input";
    case ErrorCode::behind_camera: return "behind_camera";
    case ErrorCode::empty_input: return "empty_input";
    case ErrorCode::insufficient_matches: return "insufficient_matches";
    case ErrorCode::empty_instance: return "empty_instance";
    case ErrorCode::degenerate_sample: return "degenerate_sample";
    case ErrorCode::invalid_essential: return "invalid_essential";
    case ErrorCode::estimation_failed: return "estimation_failed";
    case ErrorCode::cheirality_failed: return "cheirality_failed";
    case ErrorCode::no_depth_overlap: return "no_depth_overlap";
    case ErrorCode::scale_failed: return "scale_failed";
    case ErrorCode::unrenderable_scene: return "unrenderable_scene";
    case ErrorCode::io_error: return "io_error";
    case ErrorCode::format_error: return "format_error";
    case ErrorCode::malformed_submission: return "malformed_submission";
  }
  return "unknown";
}

/// Exception carrying a machine-checkable code next to the human-readable message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool ok, ErrorCode code, const std::string& what) {
  if (!ok) fail(code, what);
}

}  // namespace reloc
