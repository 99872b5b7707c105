#pragma once

#include <stdexcept>
#include <string>

namespace cfpt {

enum class ErrorCode {
  invalid_argument,
  invalid_config,
  invalid_distribution,
  impossible_observation,
  empty_dataset,
  invalid_model,
  empty_support,
  no_feasible_policy,
  undefined_weight,
  configuration,
  io,
};

const char* to_string(ErrorCode code);

/// Single exception type thrown by the library; `code()` tells callers which
/// contract was violated.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace cfpt
