#include "cfpt/policy/stochastic_policy.hpp"

#include <cmath>
#include <string>

#include "cfpt/errors.hpp"

namespace cfpt::policy {

namespace {

void check_distribution(std::span<const double> dist, std::size_t row) {
  double total = 0.0;
  for (double p : dist) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw Error(ErrorCode::invalid_distribution, "policy row " + std::to_string(row) + " has a negative entry");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw Error(ErrorCode::invalid_distribution,
                "policy row " + std::to_string(row) + " sums to " + std::to_string(total));
  }
}

}  // namespace

StochasticPolicy::StochasticPolicy(std::size_t num_rows, std::size_t num_actions, PolicyDomain domain)
    : num_rows_(num_rows),
      num_actions_(num_actions),
      domain_(domain),
      probs_(num_rows * num_actions, num_actions > 0 ? 1.0 / static_cast<double>(num_actions) : 0.0) {
  if (num_actions == 0) throw Error(ErrorCode::invalid_argument, "policy needs at least one action");
}

StochasticPolicy StochasticPolicy::uniform(std::size_t num_rows, std::size_t num_actions, PolicyDomain domain) {
  return StochasticPolicy(num_rows, num_actions, domain);
}

StochasticPolicy StochasticPolicy::deterministic(std::span<const std::size_t> actions, std::size_t num_actions,
                                                 PolicyDomain domain) {
  StochasticPolicy pi(actions.size(), num_actions, domain);
  for (std::size_t r = 0; r < actions.size(); ++r) pi.set_deterministic(r, actions[r]);
  return pi;
}

StochasticPolicy StochasticPolicy::from_matrix(std::size_t num_rows, std::size_t num_actions,
                                               std::vector<double> probs, PolicyDomain domain) {
  if (probs.size() != num_rows * num_actions) {
    throw Error(ErrorCode::invalid_argument, "policy matrix has the wrong number of entries");
  }
  StochasticPolicy pi(num_rows, num_actions, domain);
  for (std::size_t r = 0; r < num_rows; ++r) {
    check_distribution({probs.data() + r * num_actions, num_actions}, r);
  }
  pi.probs_ = std::move(probs);
  return pi;
}

void StochasticPolicy::set_row(std::size_t r, std::span<const double> dist) {
  if (r >= num_rows_ || dist.size() != num_actions_) {
    throw Error(ErrorCode::invalid_argument, "policy row index or width out of range");
  }
  check_distribution(dist, r);
  std::copy(dist.begin(), dist.end(), probs_.begin() + static_cast<std::ptrdiff_t>(r * num_actions_));
}

void StochasticPolicy::set_deterministic(std::size_t r, std::size_t action) {
  if (r >= num_rows_ || action >= num_actions_) {
    throw Error(ErrorCode::invalid_argument, "deterministic action out of range");
  }
  auto begin = probs_.begin() + static_cast<std::ptrdiff_t>(r * num_actions_);
  std::fill(begin, begin + static_cast<std::ptrdiff_t>(num_actions_), 0.0);
  begin[static_cast<std::ptrdiff_t>(action)] = 1.0;
}

std::size_t StochasticPolicy::sample(std::size_t r, Rng& rng) const { return sample_discrete(row(r), rng); }

std::size_t StochasticPolicy::greedy(std::size_t r) const { return argmax_lowest(row(r)); }

std::vector<std::size_t> StochasticPolicy::greedy_actions() const {
  std::vector<std::size_t> out(num_rows_);
  for (std::size_t r = 0; r < num_rows_; ++r) out[r] = greedy(r);
  return out;
}

StochasticPolicy StochasticPolicy::greedy_projection() const {
  auto actions = greedy_actions();
  return deterministic(actions, num_actions_, domain_);
}

std::size_t argmax_lowest(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

}  // namespace cfpt::policy
