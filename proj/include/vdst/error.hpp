#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vdst {

enum class ErrorKind {
  kInvalidArgument,
  kInvalidLabel,
  kDataCorruption,
  kNumericFailure,
  kUndefinedMetric,
  kIo,
};

std::string_view to_string(ErrorKind kind);

/// Library-wide exception. The kind drives CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace vdst
