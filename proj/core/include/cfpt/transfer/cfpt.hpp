#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cfpt/model.hpp"
#include "cfpt/policy/stochastic_policy.hpp"
#include "cfpt/sim/trajectory.hpp"
#include "cfpt/transfer/estimate.hpp"

namespace cfpt::transfer {

/// Which target estimate supplies the counterfactual rows (alpha-hat) during
/// a CF-PI iteration.
enum class CounterfactualRows {
  observed,   // the empirical target estimate P_T, fixed across iterations
  augmented,  // the augmented estimate from the previous iteration (P_T at k = 1)
};

/// How the source policy distribution is derived from the source optimum.
enum class SourcePolicyKind {
  epsilon_soft,  // (1 - eps) * greedy + eps * uniform
  softmax,       // Boltzmann over source action values at a temperature
};

struct CfptConfig {
  double w_target = 0.8;
  double eta = 0.7;
  double lambda = 0.3;
  double gamma = 0.99;
  std::size_t iterations = 50;              // K
  std::size_t batch_size = 0;               // N; 0 picks |H_T| up to 2000
  std::size_t samples_per_trajectory = 1;   // N'
  double epsilon = 0.15;                    // behavior randomization
  double penalty = -1.0;
  std::size_t horizon = 20;
  std::size_t max_pi_iter = 1000;
  CounterfactualRows cf_rows = CounterfactualRows::augmented;
  SourcePolicyKind source_policy = SourcePolicyKind::softmax;
  double source_policy_param = 0.1;         // epsilon or temperature

  /// Throws Error(invalid_config) when a field is out of range.
  void validate() const;
  std::size_t resolved_batch_size(std::size_t target_size) const;
};

const char* to_string(CounterfactualRows rows);
std::optional<CounterfactualRows> parse_counterfactual_rows(const std::string& name);
const char* to_string(SourcePolicyKind kind);
std::optional<SourcePolicyKind> parse_source_policy_kind(const std::string& name);

struct CfPiIteration {
  double mean_cf_return = 0.0;
  double penalty_fraction = 0.0;
  std::size_t fallbacks = 0;
  std::size_t reg_pi_iterations = 0;
  std::size_t reg_pi_cycle = 0;  // cycle length when RegPI stopped on a revisited policy
};

struct CfPiResult {
  policy::StochasticPolicy policy;
  std::vector<CfPiIteration> trace;
  sim::Dataset last_batch;  // counterfactual trajectories of the final iteration
};

/// Counterfactual policy iteration. Each of the K iterations rolls out a
/// batch of target trajectories counterfactually under the current policy,
/// estimates P_hat from the batch, augments the target estimate with eta, and
/// runs reg_pi against the source policy. Deterministic in (inputs, seed).
CfPiResult cf_pi(const policy::StochasticPolicy& pi0, const policy::StochasticPolicy& source_policy,
                 const EstimatedModel& source_model, const sim::Dataset& target, const CfptConfig& cfg,
                 std::uint64_t seed);

/// Greedy policy of policy iteration on the estimate, softened per cfg.
policy::StochasticPolicy make_source_policy(const EstimatedModel& source_model, const CfptConfig& cfg);

enum class Method { random, scratch, pooled, blind, regpi, red_cfpt, cfpt, bc, full_obs };

const char* to_string(Method m);
std::optional<Method> parse_method(const std::string& name);
const std::vector<Method>& all_methods();

/// Data a method may draw on. Unneeded members may be left null.
struct TransferInputs {
  const sim::Dataset* source_data = nullptr;
  const sim::Dataset* target_data = nullptr;
  const EstimatedModel* source_model = nullptr;
  const policy::StochasticPolicy* source_policy = nullptr;
};

/// Names of the inputs `m` needs that are missing, empty when runnable.
std::vector<std::string> missing_inputs(Method m, const TransferInputs& in);

/// Trains one method. Throws Error(configuration) when a required input is absent.
policy::StochasticPolicy run_baseline(Method m, const TransferInputs& in, const CfptConfig& cfg, std::uint64_t seed);

}  // namespace cfpt::transfer
