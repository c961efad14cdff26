#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace newsclip {

enum class ErrorCode {
  kMissingFile,
  kMagicMismatch,
  kDimMismatch,
  kManifestParse,
  kInvalidConfig,
  kLengthMismatch,
  kUnknownId,
  kDuplicateCaption,
  kInsufficientRecords,
  kUnknownReport,
  kIo,
};

std::string_view error_code_name(ErrorCode code);

// Every failure the library reports carries one of the codes above; the CLI
// maps them onto exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code), message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  // The message without the code prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

}  // namespace newsclip
