#pragma once

#include <cstddef>

#include "cfpt/model.hpp"
#include "cfpt/policy/stochastic_policy.hpp"
#include "cfpt/random.hpp"
#include "cfpt/sim/trajectory.hpp"

namespace cfpt::scm {

/// Models used by a counterfactual rollout, all over observation indices.
/// Noise for an observed transition (o, a) -> o' is abducted from
/// target.row(o, a) with probability w_target, else from source.row(o, a);
/// the counterfactual successor is then read off counterfactual.row(o_cf, a_cf).
/// Models with one row per full state (hidden flag included) are indexed by
/// state instead of observation; all supplied models must agree.
struct RolloutModels {
  const TransitionModel* source = nullptr;          // may be null when w_target == 1
  const TransitionModel* target = nullptr;
  const TransitionModel* counterfactual = nullptr;  // alpha-hat
  double w_target = 1.0;
  double penalty = -1.0;
};

struct RolloutOptions {
  std::size_t horizon = 20;
  // Take the observed action wherever one exists instead of sampling the policy.
  bool replay_observed_actions = false;
};

struct RolloutStats {
  std::size_t abducted = 0;     // steps driven by conditioned noise
  std::size_t prior = 0;        // steps past the observed length
  std::size_t fallbacks = 0;    // mixture component switched for lack of mass
};

/// Replays one observed trajectory under `policy` in the counterfactual
/// model, starting from the observed initial state and keeping the patient's
/// hidden flag. A counterfactual (observation, action) pair without support
/// in `counterfactual` ends the rollout with the penalty outcome.
sim::Trajectory counterfactual_rollout(const sim::Trajectory& observed, const policy::StochasticPolicy& policy,
                                       const RolloutModels& models, const RolloutOptions& options, Rng& rng,
                                       RolloutStats* stats = nullptr);

}  // namespace cfpt::scm
