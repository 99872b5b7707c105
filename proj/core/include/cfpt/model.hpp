#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace cfpt {

/// Next-state distribution for one (state, action) pair. `next` is strictly
/// ascending; `prob` holds the matching masses.
struct SparseRow {
  std::vector<std::uint32_t> next;
  std::vector<double> prob;

  bool empty() const { return next.empty(); }
  std::size_t size() const { return next.size(); }
  double mass(std::uint32_t state) const;
  double total() const;

  bool operator==(const SparseRow&) const = default;
};

/// Tabular transition model P(s' | s, a) over a square state space. Rows can be
/// flagged unsupported (no data); such rows are empty and must not be queried
/// as distributions.
class TransitionModel {
 public:
  TransitionModel() = default;
  TransitionModel(std::size_t num_states, std::size_t num_actions);

  std::size_t num_states() const { return num_states_; }
  std::size_t num_actions() const { return num_actions_; }

  const SparseRow& row(std::size_t state, std::size_t action) const {
    return rows_[state * num_actions_ + action];
  }
  bool supported(std::size_t state, std::size_t action) const {
    return supported_[state * num_actions_ + action] != 0;
  }

  /// Installs a row and marks it supported. Entries must be sorted by state,
  /// in range, and nonnegative; zero-mass entries are dropped.
  void set_row(std::size_t state, std::size_t action, SparseRow row);
  void clear_row(std::size_t state, std::size_t action);

  std::size_t num_supported() const;

  /// Throws Error(invalid_model) if a supported row does not sum to 1 within `tol`.
  void check_stochastic(double tol = 1e-12) const;

  bool operator==(const TransitionModel&) const = default;

 private:
  void check_index(std::size_t state, std::size_t action) const;

  std::size_t num_states_ = 0;
  std::size_t num_actions_ = 0;
  std::vector<SparseRow> rows_;
  std::vector<std::uint8_t> supported_;
};

/// Immediate rewards and episode termination for a tabular decision problem.
/// A (state, action) pair is terminal when the episode ends as soon as it is
/// taken; its value is the reward alone. A non-terminal pair whose transition
/// row is unsupported is valued at `penalty` and also ends the episode.
struct RewardTable {
  std::size_t num_states = 0;
  std::size_t num_actions = 0;
  std::vector<double> reward;
  std::vector<std::uint8_t> terminal;
  double penalty = -1.0;

  double at(std::size_t state, std::size_t action) const { return reward[state * num_actions + action]; }
  bool is_terminal(std::size_t state, std::size_t action) const {
    return terminal[state * num_actions + action] != 0;
  }
};

}  // namespace cfpt
