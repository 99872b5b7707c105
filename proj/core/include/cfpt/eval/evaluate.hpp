#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cfpt/model.hpp"
#include "cfpt/policy/stochastic_policy.hpp"
#include "cfpt/random.hpp"
#include "cfpt/sim/simulator.hpp"
#include "cfpt/sim/trajectory.hpp"

namespace cfpt::eval {

inline constexpr std::size_t kDefaultBootstrap = 100;
inline constexpr std::size_t kDefaultEvalRollouts = 5000;

/// Fractions indexed by sim::TerminalOutcome (discharge, death, censored, penalty).
using OutcomeFractions = std::array<double, 4>;

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

struct SubpopulationReport {
  std::size_t n_trajectories = 0;
  double mean_return = 0.0;
  OutcomeFractions outcomes{};
};

struct EvalReport {
  double mean_return = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n_trajectories = 0;
  OutcomeFractions outcomes{};
  SubpopulationReport diabetic;
  SubpopulationReport non_diabetic;
};

/// Percentile bootstrap interval of the mean from `resamples` resamples.
Interval bootstrap_ci(std::span<const double> values, std::size_t resamples, Rng& rng, double level = 0.95);

/// Mean return, bootstrap interval, outcome fractions and subpopulation
/// splits. gamma == 1 gives undiscounted returns. The interval is widened to
/// contain the point estimate if resampling noise leaves it outside.
EvalReport summarize(const sim::Dataset& rollouts, std::size_t bootstrap, std::uint64_t seed, double gamma = 1.0);

struct TrueRewardOptions {
  double p_diab = 0.8;
  std::size_t horizon = sim::kDefaultHorizon;
  std::size_t bootstrap = kDefaultBootstrap;
  double gamma = 1.0;
};

/// Fresh rollouts of `policy` in the ground-truth simulator.
/// Throws Error(invalid_argument) for n == 0.
EvalReport true_reward(const policy::StochasticPolicy& policy, const sim::SepsisSimulator& simulator, std::size_t n,
                       std::uint64_t seed, const TrueRewardOptions& options = {});

/// Behavior-cloned policy over observations with `pseudo_count` added to every
/// action count (Laplace smoothing at 1).
policy::StochasticPolicy estimate_behavior_policy(const sim::Dataset& data, double pseudo_count = 1.0);

/// Self-normalized importance sampling estimate of the return of `pi_eval`.
/// Throws Error(undefined_weight) when mu_hat has no mass on an observed
/// action, or when every trajectory receives weight zero.
double wis(const sim::Dataset& data, const policy::StochasticPolicy& pi_eval, const policy::StochasticPolicy& mu_hat,
           double gamma = 1.0);

struct CfPeOptions {
  double w_target = 1.0;
  std::size_t horizon = sim::kDefaultHorizon;
  bool replay_observed_actions = false;
  double penalty = -1.0;
  std::size_t bootstrap = kDefaultBootstrap;
};

struct CfPeRecord {
  std::uint64_t id = 0;
  bool diabetic = false;
  sim::TerminalOutcome observed_outcome = sim::TerminalOutcome::censored;
  sim::TerminalOutcome cf_outcome = sim::TerminalOutcome::censored;
  double observed_return = 0.0;
  double cf_return = 0.0;
};

struct CfPeReport {
  EvalReport summary;              // over counterfactual returns and outcomes
  std::size_t unchanged = 0;       // records whose outcome matches the observed one
  std::vector<CfPeRecord> records;
  sim::Dataset counterfactuals;
};

/// Counterfactual policy evaluation: every observed trajectory is replayed
/// under `pi_eval` with noise abducted from its observed transitions. The
/// target rows come from `target_model` (usually the dataset's own estimate),
/// mixed with `source_model` rows when w_target < 1.
CfPeReport cf_pe(const sim::Dataset& data, const policy::StochasticPolicy& pi_eval, const TransitionModel& target_model,
                 const TransitionModel* source_model, const CfPeOptions& options, std::uint64_t seed);

/// E[R | do(pi)] - E[R | do(mu)].
inline double ate(double policy_reward, double behavior_reward) { return policy_reward - behavior_reward; }

struct FeatureHistogram {
  std::string feature;
  std::vector<std::size_t> counts;
  std::vector<double> frequency;

  std::vector<bool> support() const;
};

/// Level frequencies over every visited step for each vital and treatment flag.
/// Throws Error(empty_dataset) when there are no steps.
std::vector<FeatureHistogram> visitation_histogram(const sim::Dataset& data);

/// True when every nonzero bin of `inner` is nonzero in `outer`.
bool support_contains(const std::vector<FeatureHistogram>& outer, const std::vector<FeatureHistogram>& inner);

std::string report_to_json(const EvalReport& report, int indent = 2);
EvalReport report_from_json(const std::string& text);

}  // namespace cfpt::eval
