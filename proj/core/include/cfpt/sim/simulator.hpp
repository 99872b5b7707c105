#pragma once

#include <cstdint>
#include <vector>

#include "cfpt/model.hpp"
#include "cfpt/policy/stochastic_policy.hpp"
#include "cfpt/random.hpp"
#include "cfpt/sim/dynamics.hpp"
#include "cfpt/sim/trajectory.hpp"

namespace cfpt::sim {

inline constexpr std::size_t kDefaultHorizon = 20;

/// Ground-truth sepsis simulator. Immutable after construction; safe to share
/// across threads.
class SepsisSimulator {
 public:
  explicit SepsisSimulator(DynamicsConfig cfg = DynamicsConfig::repo_default());

  const DynamicsConfig& config() const { return config_; }
  const TransitionModel& true_model() const { return model_; }
  const RewardTable& state_rewards() const { return state_rewards_; }
  const RewardTable& observation_rewards() const { return observation_rewards_; }

  /// Candidate start states (treatments off) for a patient type.
  const std::vector<std::uint32_t>& initial_states(bool diabetic) const {
    return diabetic ? initial_diabetic_ : initial_plain_;
  }
  std::size_t sample_initial_state(bool diabetic, Rng& rng) const;

  /// Rolls out `policy` until discharge, death or `horizon` decisions. The
  /// policy is indexed by observation or full state according to its domain.
  Trajectory sample_trajectory(const policy::StochasticPolicy& policy, bool diabetic, std::size_t horizon,
                               Rng& rng) const;
  Trajectory sample_trajectory_from(const policy::StochasticPolicy& policy, std::size_t start_state,
                                    std::size_t horizon, Rng& rng) const;

 private:
  DynamicsConfig config_;
  TransitionModel model_;
  RewardTable state_rewards_;
  RewardTable observation_rewards_;
  std::vector<std::uint32_t> initial_plain_;
  std::vector<std::uint32_t> initial_diabetic_;
};

inline std::size_t policy_row(const policy::StochasticPolicy& pi, std::size_t state) {
  return pi.domain() == policy::PolicyDomain::full_state ? state : observation_of(state);
}

/// Draws `n` independent patients (diabetic with probability `p_diab`) and
/// rolls each out under `policy`. Trajectory i uses a stream derived from
/// (seed, i), so the result does not depend on evaluation order.
/// Throws Error(empty_dataset) for n == 0 and Error(invalid_argument) for p_diab outside [0,1].
Dataset generate_dataset(const SepsisSimulator& sim, const policy::StochasticPolicy& policy, std::size_t n,
                         double p_diab, std::size_t horizon, std::uint64_t seed);

}  // namespace cfpt::sim
