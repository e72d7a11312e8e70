#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace detpipe {

/// Diagnostic categories surfaced by the toolkit. The CLI maps these to
/// process exit codes (validation vs missing prerequisite vs internal).
enum class Errc {
  missing_file,
  size_mismatch,
  duplicate_case,
  unknown_class,
  bad_format,
  unsupported_dtype,
  truncated_payload,
  io_error,
  invalid_argument,
  missing_prerequisite,
  internal,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::missing_file: return "missing_file";
    case Errc::size_mismatch: return "size_mismatch";
    case Errc::duplicate_case: return "duplicate_case";
    case Errc::unknown_class: return "unknown_class";
    case Errc::bad_format: return "bad_format";
    case Errc::unsupported_dtype: return "unsupported_dtype";
    case Errc::truncated_payload: return "truncated_payload";
    case Errc::io_error: return "io_error";
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::missing_prerequisite: return "missing_prerequisite";
    case Errc::internal: return "internal";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace detpipe
