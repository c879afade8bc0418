#pragma once

#include <stdexcept>
#include <string>

namespace gridvit {

// Fine-grained error classes. Each maps to one of the coarse process-level
// codes used by the shared-library API and the CLI (see coarse_code()).
enum class ErrorCode {
  validation,          // bad arguments, violated preconditions
  config,              // malformed or inconsistent configuration
  parse,               // malformed file contents (JSON, manifest lines)
  dimension_mismatch,  // tensor shape conflicts
  bad_magic,           // file does not start with the expected magic
  truncated,           // file payload shorter than its header promises
  non_finite,          // NaN/Inf where finite values are required
  shape_contradiction, // serialized tensor shapes contradict the stored config
  unknown_case,        // case id not present in the manifest
  io,                  // filesystem failures (open/read/write)
  train_abort,         // non-finite loss or gradient during training
  eval_failure,        // inference/evaluation could not proceed
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(msg), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  // Coarse class shared with the C API and the CLI exit codes:
  // 2 config/validation, 3 I/O, 4 training abort, 5 evaluation/inference.
  int coarse_code() const noexcept {
    switch (code_) {
      case ErrorCode::validation:
      case ErrorCode::config:
      case ErrorCode::parse:
      case ErrorCode::dimension_mismatch:
      case ErrorCode::unknown_case:
        return 2;
      case ErrorCode::bad_magic:
      case ErrorCode::truncated:
      case ErrorCode::non_finite:
      case ErrorCode::io:
        return 3;
      case ErrorCode::train_abort:
        return 4;
      case ErrorCode::shape_contradiction:
      case ErrorCode::eval_failure:
        return 5;
    }
    return 5;
  }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) {
  throw Error(code, msg);
}

}  // namespace gridvit
