#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace coannot {

enum class ErrorCode {
  InvalidArgument,
  InvalidClass,
  InsufficientData,
  DegenerateDistribution,
  Infeasible,
  NotFound,
  Coverage,
  RoundClosed,
  AlreadyClosed,
  Corruption,
  Validation,
  Io,
  Configuration,
  Unauthorized,
  Conflict,
};

std::string_view to_string(ErrorCode code);

/// Domain error carrying a machine-readable code and optional detail lines
/// (offending ids, violated invariants).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::vector<std::string> details = {})
      : std::runtime_error(message), code_(code), details_(std::move(details)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::vector<std::string>& details() const noexcept { return details_; }

 private:
  ErrorCode code_;
  std::vector<std::string> details_;
};

}  // namespace coannot
