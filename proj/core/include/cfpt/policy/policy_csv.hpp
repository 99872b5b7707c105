#pragma once

#include <iosfwd>
#include <string>

#include "cfpt/policy/stochastic_policy.hpp"

namespace cfpt::policy {

/// Dense CSV: a header "obs,<action names...>" (or "state,..." for full-state
/// policies), then one row per index. Probabilities round-trip exactly.
void write_policy_csv(std::ostream& out, const StochasticPolicy& pi);
StochasticPolicy read_policy_csv(std::istream& in);
void save_policy_csv(const std::string& path, const StochasticPolicy& pi);
StochasticPolicy load_policy_csv(const std::string& path);

}  // namespace cfpt::policy
