#pragma once

#include <stdexcept>
#include <string>

namespace gridshield {

enum class ErrorCode {
  OutOfBounds,
  Overflow,
  ConfigError,
  MemoryBudget,
  NotBoxAffine,
  NotAFixpoint,
  SizeLimit,
  EmptyMenu,
  DomainError,
  FormatError,
  IoError,
  Mismatch,
};

const char* to_string(ErrorCode code) noexcept;

/// Every failure raised by the core carries one of the codes above so the C
/// layer can translate it into a status without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace gridshield
