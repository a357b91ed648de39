#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace al4rag {

enum class ErrorCode {
  io_failure,
  malformed_line,
  duplicate_id,
  empty_input,
  dimension_mismatch,
  unknown_record,
  empty_selected_set,
  empty_pool,
  insufficient_pool,
  config_invalid,
  unlabeled_record,
  degenerate_pair,
  non_finite_input,
  unknown_task,
  not_leased,
  invalid_label,
  cache_mismatch,
  usage,
};

std::string_view to_string(ErrorCode code);

/// Every module reports failures through this type. `code()` is stable and
/// is what callers branch on; `what()` carries the human-readable detail.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::io_failure: return "io-failure";
    case ErrorCode::malformed_line: return "malformed-line";
    case ErrorCode::duplicate_id: return "duplicate-id";
    case ErrorCode::empty_input: return "empty-input";
    case ErrorCode::dimension_mismatch: return "dimension-mismatch";
    case ErrorCode::unknown_record: return "unknown-record";
    case ErrorCode::empty_selected_set: return "empty-selected-set";
    case ErrorCode::empty_pool: return "empty-pool";
    case ErrorCode::insufficient_pool: return "insufficient-pool";
    case ErrorCode::config_invalid: return "config-invalid";
    case ErrorCode::unlabeled_record: return "unlabeled-record";
    case ErrorCode::degenerate_pair: return "degenerate-pair";
    case ErrorCode::non_finite_input: return "non-finite-input";
    case ErrorCode::unknown_task: return "unknown-task";
    case ErrorCode::not_leased: return "not-leased";
    case ErrorCode::invalid_label: return "invalid-label";
    case ErrorCode::cache_mismatch: return "cache-mismatch";
    case ErrorCode::usage: return "usage";
  }
  return "unknown";
}

}  // namespace al4rag
