#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cfpt/model.hpp"
#include "cfpt/policy/stochastic_policy.hpp"

namespace cfpt::policy {

using ValueFunction = std::vector<double>;

/// Actions whose values differ by less than this are treated as tied and the
/// lowest index is chosen. Evaluation tolerances are kept well below it.
inline constexpr double kTieTolerance = 1e-7;
inline constexpr double kDefaultEvalTolerance = 1e-10;
inline constexpr std::size_t kDefaultMaxIterations = 1000;

/// Q(s, a) given V: the reward alone for terminal pairs, the model's penalty
/// for non-terminal pairs without a supported row, else R + gamma * P V.
double action_value(const TransitionModel& model, const RewardTable& rewards, double gamma,
                    std::span<const double> values, std::size_t state, std::size_t action);

/// Lowest-index action within kTieTolerance of the best value.
std::size_t tolerant_argmax(std::span<const double> values);

/// Successive approximation of V^pi to a Bellman residual <= tol.
/// Throws Error(invalid_argument) for gamma outside [0,1) and
/// Error(invalid_model) for a supported row that is not a distribution.
ValueFunction policy_evaluation(const StochasticPolicy& policy, const TransitionModel& model,
                                const RewardTable& rewards, double gamma, double tol = kDefaultEvalTolerance,
                                std::span<const double> warm_start = {});

/// max_s |(T_pi V)(s) - V(s)|.
double bellman_residual(const StochasticPolicy& policy, const TransitionModel& model, const RewardTable& rewards,
                        double gamma, std::span<const double> values);

struct PolicyIterationResult {
  StochasticPolicy policy;  // deterministic
  ValueFunction values;
  std::size_t iterations = 0;
  bool converged = false;
  std::size_t cycle_length = 0;  // > 0 when the iteration stopped on a revisited policy
};

/// Classic policy iteration from the uniform policy, greedy improvement with
/// kTieTolerance tie-breaking. Stops when the greedy policy repeats; a revisit of
/// an older policy (possible only through near-ties) stops it too.
PolicyIterationResult policy_iteration(const TransitionModel& model, const RewardTable& rewards, double gamma,
                                       std::size_t max_iter = kDefaultMaxIterations,
                                       PolicyDomain domain = PolicyDomain::observation);

/// (1 - epsilon) * optimal + epsilon * uniform, rows renormalized.
StochasticPolicy make_behavior_policy(const StochasticPolicy& optimal, double epsilon);

/// Proposal over actions at `state`: nu(a) proportional to Q(s, a) - min_b Q(s, b)
/// over available actions (terminal or supported). Unavailable actions get 0;
/// when every available action ties, nu is uniform over them.
/// Throws Error(empty_support) when no action is available.
std::vector<double> proposal_distribution(std::span<const double> values, const TransitionModel& model,
                                          const RewardTable& rewards, double gamma, std::size_t state);

/// Minimizer of lambda * KL(pi || nu) + (1 - lambda) * KL(pi || source):
/// pi proportional to nu^lambda * source^(1 - lambda).
/// Throws Error(no_feasible_policy) when the two supports do not overlap.
std::vector<double> kl_aggregate(std::span<const double> nu, std::span<const double> source, double lambda);

/// The objective minimized by kl_aggregate; +infinity when pi puts mass where
/// a weighted reference has none.
double kl_objective(std::span<const double> pi, std::span<const double> nu, std::span<const double> source,
                    double lambda);

struct RegPiResult {
  StochasticPolicy policy;      // deterministic iterate
  StochasticPolicy aggregated;  // log-aggregated distribution from the last improvement
  ValueFunction values;
  std::size_t iterations = 0;
  bool converged = false;
  std::size_t cycle_length = 0;  // > 0 when the iteration stopped on a revisited policy
};

/// Policy iteration whose improvement step takes, per state, the argmax of
/// kl_aggregate(nu, source, lambda). lambda == 1 reduces to greedy policy
/// iteration; lambda == 0 to the source policy's argmax. The regularized
/// improvement is not monotone and can cycle between deterministic policies;
/// then the cycle member with the largest summed value is returned.
RegPiResult reg_pi(const StochasticPolicy& initial, double gamma, const TransitionModel& model,
                   const RewardTable& rewards, const StochasticPolicy& source, double lambda,
                   std::size_t max_iter = kDefaultMaxIterations);

}  // namespace cfpt::policy
