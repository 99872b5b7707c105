#include "cfpt/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cfpt/errors.hpp"

namespace cfpt {

double SparseRow::mass(std::uint32_t state) const {
  auto it = std::lower_bound(next.begin(), next.end(), state);
  if (it == next.end() || *it != state) return 0.0;
  return prob[static_cast<std::size_t>(it - next.begin())];
}

double SparseRow::total() const {
  double sum = 0.0;
  for (double p : prob) sum += p;
  return sum;
}

TransitionModel::TransitionModel(std::size_t num_states, std::size_t num_actions)
    : num_states_(num_states),
      num_actions_(num_actions),
      rows_(num_states * num_actions),
      supported_(num_states * num_actions, 0) {}

void TransitionModel::check_index(std::size_t state, std::size_t action) const {
  if (state >= num_states_ || action >= num_actions_) {
    throw Error(ErrorCode::invalid_argument,
                "transition index (" + std::to_string(state) + ", " + std::to_string(action) + ") out of range");
  }
}

void TransitionModel::set_row(std::size_t state, std::size_t action, SparseRow row) {
  check_index(state, action);
  if (row.next.size() != row.prob.size()) {
    throw Error(ErrorCode::invalid_model, "row index/probability length mismatch");
  }
  SparseRow cleaned;
  cleaned.next.reserve(row.next.size());
  cleaned.prob.reserve(row.prob.size());
  for (std::size_t i = 0; i < row.next.size(); ++i) {
    if (row.next[i] >= num_states_) throw Error(ErrorCode::invalid_model, "successor index out of range");
    if (i > 0 && row.next[i] <= row.next[i - 1]) throw Error(ErrorCode::invalid_model, "row successors not ascending");
    if (!(row.prob[i] >= 0.0) || !std::isfinite(row.prob[i])) {
      throw Error(ErrorCode::invalid_model, "negative or non-finite transition mass");
    }
    if (row.prob[i] > 0.0) {
      cleaned.next.push_back(row.next[i]);
      cleaned.prob.push_back(row.prob[i]);
    }
  }
  if (cleaned.empty()) throw Error(ErrorCode::invalid_model, "supported row has no mass");
  rows_[state * num_actions_ + action] = std::move(cleaned);
  supported_[state * num_actions_ + action] = 1;
}

void TransitionModel::clear_row(std::size_t state, std::size_t action) {
  check_index(state, action);
  rows_[state * num_actions_ + action] = SparseRow{};
  supported_[state * num_actions_ + action] = 0;
}

std::size_t TransitionModel::num_supported() const {
  return static_cast<std::size_t>(std::count(supported_.begin(), supported_.end(), std::uint8_t{1}));
}

void TransitionModel::check_stochastic(double tol) const {
  for (std::size_t s = 0; s < num_states_; ++s) {
    for (std::size_t a = 0; a < num_actions_; ++a) {
      if (!supported(s, a)) continue;
      const double total = row(s, a).total();
      if (std::abs(total - 1.0) > tol) {
        throw Error(ErrorCode::invalid_model, "row (" + std::to_string(s) + ", " + std::to_string(a) +
                                                  ") sums to " + std::to_string(total));
      }
    }
  }
}

}  // namespace cfpt
