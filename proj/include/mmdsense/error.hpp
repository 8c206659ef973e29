#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mmdsense {

enum class ErrorCode {
  parse_error,
  validation_error,
  dimension_mismatch,
  empty_shared_vocab,
  insufficient_vocab,
  sample_too_small,
  non_finite_gradient,
  all_runs_rejected,
  empty_selection,
  word_not_found,
  invalid_config,
  io_error,
  internal,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::parse_error: return "ParseError";
    case ErrorCode::validation_error: return "ValidationError";
    case ErrorCode::dimension_mismatch: return "DimensionMismatch";
    case ErrorCode::empty_shared_vocab: return "EmptySharedVocab";
    case ErrorCode::insufficient_vocab: return "InsufficientVocab";
    case ErrorCode::sample_too_small: return "SampleTooSmall";
    case ErrorCode::non_finite_gradient: return "NonFiniteGradient";
    case ErrorCode::all_runs_rejected: return "AllRunsRejected";
    case ErrorCode::empty_selection: return "EmptySelection";
    case ErrorCode::word_not_found: return "WordNotFound";
    case ErrorCode::invalid_config: return "InvalidConfig";
    case ErrorCode::io_error: return "IOError";
    case ErrorCode::internal: return "InternalError";
  }
  return "UnknownError";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI, pair orchestration) can map it to an exit status or a
/// per-record error without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mmdsense
