#include "cfpt/sim/simulator.hpp"

#include "cfpt/errors.hpp"

namespace cfpt::sim {

SepsisSimulator::SepsisSimulator(DynamicsConfig cfg)
    : config_(std::move(cfg)),
      model_(build_true_mdp(config_)),
      state_rewards_(make_reward_table(true)),
      observation_rewards_(make_reward_table(false)) {
  for (std::size_t s = 0; s < kNumStates; ++s) {
    const PatientState p = decode_state(s);
    if (p.abx_on || p.vaso_on || p.vent_on) continue;
    const int abnormal = p.num_abnormal();
    if (abnormal < config_.initial.min_abnormal || abnormal > config_.initial.max_abnormal) continue;
    (p.diabetic ? initial_diabetic_ : initial_plain_).push_back(static_cast<std::uint32_t>(s));
  }
}

std::size_t SepsisSimulator::sample_initial_state(bool diabetic, Rng& rng) const {
  const auto& pool = initial_states(diabetic);
  const auto i = static_cast<std::size_t>(uniform_open(rng) * static_cast<double>(pool.size()));
  return pool[std::min(i, pool.size() - 1)];
}

Trajectory SepsisSimulator::sample_trajectory(const policy::StochasticPolicy& policy, bool diabetic,
                                              std::size_t horizon, Rng& rng) const {
  const std::size_t start = sample_initial_state(diabetic, rng);
  return sample_trajectory_from(policy, start, horizon, rng);
}

Trajectory SepsisSimulator::sample_trajectory_from(const policy::StochasticPolicy& policy, std::size_t start_state,
                                                   std::size_t horizon, Rng& rng) const {
  if (horizon == 0) throw Error(ErrorCode::invalid_argument, "horizon must be at least 1");
  Trajectory traj;
  traj.diabetic = start_state >= kNumObservations;
  std::size_t state = start_state;
  for (std::size_t t = 0; t < horizon; ++t) {
    const std::size_t action = policy.sample(policy_row(policy, state), rng);
    const StepResult result = reward_and_termination(decode_state(state), Action::from_index(action));
    traj.steps.push_back(Step{static_cast<std::uint32_t>(state), static_cast<std::uint32_t>(observation_of(state)),
                              static_cast<std::uint8_t>(action), result.reward});
    if (result.outcome) {
      traj.outcome = *result.outcome;
      return traj;
    }
    if (t + 1 == horizon) break;
    const SparseRow& row = model_.row(state, action);
    state = row.next[sample_discrete(row.prob, rng)];
  }
  traj.outcome = TerminalOutcome::censored;
  return traj;
}

Dataset generate_dataset(const SepsisSimulator& sim, const policy::StochasticPolicy& policy, std::size_t n,
                         double p_diab, std::size_t horizon, std::uint64_t seed) {
  if (n == 0) throw Error(ErrorCode::empty_dataset, "requested a dataset with zero trajectories");
  if (!(p_diab >= 0.0 && p_diab <= 1.0)) throw Error(ErrorCode::invalid_argument, "p_diab must lie in [0,1]");
  Dataset data;
  data.trajectories.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = make_rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    const bool diabetic = uniform_open(rng) < p_diab;
    Trajectory t = sim.sample_trajectory(policy, diabetic, horizon, rng);
    t.id = i;
    data.trajectories.push_back(std::move(t));
  }
  return data;
}

}  // namespace cfpt::sim
