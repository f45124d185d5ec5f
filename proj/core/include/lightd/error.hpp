#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace lightd {

enum class ErrorCode {
  kInvalidArgument,
  kDecodeError,
  kUnsupportedFormat,
  kBackendUnavailable,
  kBackendError,
  kUnsupportedCapability,
  kDegenerateEmbedding,
  kDegenerateDistribution,
  kInsufficientData,
  kParseError,
  kNonFiniteLoss,
  kIoError,
};

std::string_view to_string(ErrorCode code);

/// Base exception for every failure raised by the toolkit. The code is
/// stable and is what callers (and the CLI exit path) should branch on.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// PNG decode failure; `offset` is the byte position in the input stream
/// where the problem was detected.
class DecodeError : public Error {
 public:
  DecodeError(std::size_t offset, const std::string& message)
      : Error(ErrorCode::kDecodeError,
              "png decode error at offset " + std::to_string(offset) + ": " +
                  message),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

[[noreturn]] inline void throw_invalid(const std::string& message) {
  throw Error(ErrorCode::kInvalidArgument, message);
}

}  // namespace lightd
