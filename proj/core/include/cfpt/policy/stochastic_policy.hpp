#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cfpt/random.hpp"

namespace cfpt::policy {

/// Which index a policy row is keyed by: the observation (diabetic flag
/// hidden) or the full simulator state.
enum class PolicyDomain { observation, full_state };

/// Row-stochastic action distribution, one row per observation (or state).
class StochasticPolicy {
 public:
  StochasticPolicy() = default;

  /// Uniform policy.
  StochasticPolicy(std::size_t num_rows, std::size_t num_actions,
                   PolicyDomain domain = PolicyDomain::observation);

  static StochasticPolicy uniform(std::size_t num_rows, std::size_t num_actions,
                                  PolicyDomain domain = PolicyDomain::observation);
  static StochasticPolicy deterministic(std::span<const std::size_t> actions, std::size_t num_actions,
                                        PolicyDomain domain = PolicyDomain::observation);
  static StochasticPolicy from_matrix(std::size_t num_rows, std::size_t num_actions, std::vector<double> probs,
                                      PolicyDomain domain = PolicyDomain::observation);

  std::size_t num_rows() const { return num_rows_; }
  std::size_t num_actions() const { return num_actions_; }
  PolicyDomain domain() const { return domain_; }

  std::span<const double> row(std::size_t r) const {
    return {probs_.data() + r * num_actions_, num_actions_};
  }
  double prob(std::size_t r, std::size_t a) const { return probs_[r * num_actions_ + a]; }
  const std::vector<double>& matrix() const { return probs_; }

  /// Replaces a row; throws Error(invalid_distribution) unless it is a
  /// distribution within 1e-9.
  void set_row(std::size_t r, std::span<const double> dist);
  void set_deterministic(std::size_t r, std::size_t action);

  std::size_t sample(std::size_t r, Rng& rng) const;

  /// Most probable action, lowest index on ties.
  std::size_t greedy(std::size_t r) const;
  std::vector<std::size_t> greedy_actions() const;
  StochasticPolicy greedy_projection() const;

  bool operator==(const StochasticPolicy&) const = default;

 private:
  std::size_t num_rows_ = 0;
  std::size_t num_actions_ = 0;
  PolicyDomain domain_ = PolicyDomain::observation;
  std::vector<double> probs_;
};

/// Index of the largest entry; the lowest index wins ties.
std::size_t argmax_lowest(std::span<const double> values);

}  // namespace cfpt::policy
