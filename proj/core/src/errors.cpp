#include "cfpt/errors.hpp"

namespace cfpt {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::invalid_config: return "invalid-config";
    case ErrorCode::invalid_distribution: return "invalid-distribution";
    case ErrorCode::impossible_observation: return "impossible-observation";
    case ErrorCode::empty_dataset: return "empty-dataset";
    case ErrorCode::invalid_model: return "invalid-model";
    case ErrorCode::empty_support: return "empty-support";
    case ErrorCode::no_feasible_policy: return "no-feasible-policy";
    case ErrorCode::undefined_weight: return "undefined-weight";
    case ErrorCode::configuration: return "configuration";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

}  // namespace cfpt
