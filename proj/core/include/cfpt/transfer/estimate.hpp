#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cfpt/model.hpp"
#include "cfpt/sim/trajectory.hpp"

namespace cfpt::transfer {

enum class StateSpace { observation, full_state };

/// Maximum-likelihood transition estimate. Rows never visited stay
/// unsupported; `counts` holds the number of observed transitions per row.
struct EstimatedModel {
  TransitionModel transitions;
  std::vector<std::uint32_t> counts;

  bool supported(std::size_t s, std::size_t a) const { return transitions.supported(s, a); }
  std::uint32_t count(std::size_t s, std::size_t a) const { return counts[s * transitions.num_actions() + a]; }
};

/// Counts (s_t, a_t, s_{t+1}) over every consecutive step pair. With
/// StateSpace::full_state the hidden flag is part of the index.
/// Throws Error(empty_dataset) for an empty dataset.
EstimatedModel estimate_transitions(const sim::Dataset& data, StateSpace space = StateSpace::observation);

/// Row-wise eta * P_T + (1 - eta) * P_hat, renormalized. Rows supported in
/// only one input are copied from it; rows supported in neither stay
/// unsupported.
TransitionModel augment_transitions(const TransitionModel& p_target, const TransitionModel& p_hat, double eta);

/// Sparse CSV with header obs,action,next_obs,prob; one line per nonzero entry.
void write_model_csv(std::ostream& out, const TransitionModel& model);
TransitionModel read_model_csv(std::istream& in, std::size_t num_states, std::size_t num_actions);
void save_model_csv(const std::string& path, const TransitionModel& model);

}  // namespace cfpt::transfer
