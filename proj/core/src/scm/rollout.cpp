#include "cfpt/scm/rollout.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "cfpt/errors.hpp"
#include "cfpt/scm/gumbel.hpp"
#include "cfpt/sim/simulator.hpp"

namespace cfpt::scm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Noise only matters on categories where the counterfactual row has mass, and
// conditioning only involves the abduction row, so both are compacted onto the
// union of their supports.
struct Compact {
  std::vector<std::uint32_t> index;
  std::vector<double> log_abduct;
  std::vector<double> log_cf;
  std::vector<double> noise;

  std::size_t build(const SparseRow& abduct, const SparseRow& cf, std::uint32_t observed_next) {
    index.clear();
    std::set_union(abduct.next.begin(), abduct.next.end(), cf.next.begin(), cf.next.end(),
                   std::back_inserter(index));
    log_abduct.assign(index.size(), kNegInf);
    log_cf.assign(index.size(), kNegInf);
    noise.resize(index.size());
    std::size_t k = index.size();
    for (std::size_t i = 0, a = 0, c = 0; i < index.size(); ++i) {
      if (a < abduct.size() && abduct.next[a] == index[i]) log_abduct[i] = std::log(abduct.prob[a++]);
      if (c < cf.size() && cf.next[c] == index[i]) log_cf[i] = std::log(cf.prob[c++]);
      if (index[i] == observed_next) k = i;
    }
    return k;
  }
};

bool has_mass(const TransitionModel* model, std::size_t obs, std::size_t action, std::uint32_t next) {
  return model != nullptr && model->supported(obs, action) && model->row(obs, action).mass(next) > 0.0;
}

}  // namespace

sim::Trajectory counterfactual_rollout(const sim::Trajectory& observed, const policy::StochasticPolicy& policy,
                                       const RolloutModels& models, const RolloutOptions& options, Rng& rng,
                                       RolloutStats* stats) {
  if (observed.steps.empty()) throw Error(ErrorCode::invalid_argument, "observed trajectory is empty");
  if (options.horizon == 0) throw Error(ErrorCode::invalid_argument, "horizon must be at least 1");
  if (models.target == nullptr || models.counterfactual == nullptr) {
    throw Error(ErrorCode::invalid_argument, "rollout needs target and counterfactual models");
  }
  if (!(models.w_target >= 0.0 && models.w_target <= 1.0)) {
    throw Error(ErrorCode::invalid_argument, "mixture weight must lie in [0,1]");
  }
  if (models.w_target < 1.0 && models.source == nullptr) {
    throw Error(ErrorCode::invalid_argument, "a mixture weight below 1 needs a source model");
  }

  const bool full_state = models.counterfactual->num_states() == sim::kNumStates;
  for (const TransitionModel* m : {models.source, models.target, models.counterfactual}) {
    if (m != nullptr && m->num_states() != (full_state ? sim::kNumStates : sim::kNumObservations)) {
      throw Error(ErrorCode::invalid_argument, "rollout models disagree on the state space");
    }
  }
  auto index_of = [full_state](std::size_t s) { return full_state ? s : sim::observation_of(s); };

  sim::Trajectory cf;
  cf.id = observed.id;
  cf.diabetic = observed.diabetic;
  const std::size_t hidden_offset = observed.diabetic ? sim::kNumObservations : 0;
  std::size_t state = observed.steps.front().state;
  Compact compact;

  for (std::size_t t = 0; t < options.horizon; ++t) {
    const std::size_t obs = sim::observation_of(state);
    const bool have_observed_step = t < observed.steps.size();
    const std::size_t action = options.replay_observed_actions && have_observed_step
                                   ? observed.steps[t].action
                                   : policy.sample(sim::policy_row(policy, state), rng);
    const sim::StepResult result =
        sim::reward_and_termination(sim::decode_state(state), sim::Action::from_index(action));
    cf.steps.push_back(sim::Step{static_cast<std::uint32_t>(state), static_cast<std::uint32_t>(obs),
                                 static_cast<std::uint8_t>(action), result.reward});
    if (result.outcome) {
      cf.outcome = *result.outcome;
      return cf;
    }
    if (t + 1 == options.horizon) break;
    const std::size_t row = index_of(state);
    if (!models.counterfactual->supported(row, action)) {
      cf.steps.back().reward += models.penalty;
      cf.outcome = sim::TerminalOutcome::penalty;
      return cf;
    }
    const SparseRow& cf_row = models.counterfactual->row(row, action);

    std::size_t next;
    if (t + 1 < observed.steps.size()) {
      const sim::Step& o = observed.steps[t];
      const std::size_t o_row = index_of(o.state);
      const auto k_next = static_cast<std::uint32_t>(index_of(observed.steps[t + 1].state));
      const bool target_ok = has_mass(models.target, o_row, o.action, k_next);
      const bool source_ok = has_mass(models.source, o_row, o.action, k_next);
      if (!target_ok && !source_ok) {
        throw Error(ErrorCode::impossible_observation,
                    "observed transition at step " + std::to_string(t) + " of trajectory " +
                        std::to_string(observed.id) + " has no mass under either prior component");
      }
      const bool drew_target = uniform_open(rng) < models.w_target;
      bool use_target = drew_target;
      if (use_target && !target_ok) use_target = false;
      if (!use_target && !source_ok) use_target = true;
      if (stats != nullptr && use_target != drew_target) ++stats->fallbacks;
      const TransitionModel* abduct_model = use_target ? models.target : models.source;
      const std::size_t k = compact.build(abduct_model->row(o_row, o.action), cf_row, k_next);
      topdown_into(compact.log_abduct, k, rng, compact.noise);
      for (std::size_t j = 0; j < compact.noise.size(); ++j) compact.noise[j] += compact.log_cf[j];
      next = compact.index[argmax_index(compact.noise)];
      if (stats != nullptr) ++stats->abducted;
    } else {
      next = cf_row.next[sample_discrete(cf_row.prob, rng)];
      if (stats != nullptr) ++stats->prior;
    }
    state = full_state ? next : next + hidden_offset;
  }
  cf.outcome = sim::TerminalOutcome::censored;
  return cf;
}

}  // namespace cfpt::scm
