#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cfpt/sim/patient.hpp"

namespace cfpt::sim {

/// One decision point. `reward` is the reward of taking `action` in `state`;
/// the successor is the next step's state.
struct Step {
  std::uint32_t state = 0;
  std::uint32_t obs = 0;
  std::uint8_t action = 0;
  double reward = 0.0;

  bool operator==(const Step&) const = default;
};

struct Trajectory {
  std::uint64_t id = 0;
  bool diabetic = false;
  std::vector<Step> steps;
  TerminalOutcome outcome = TerminalOutcome::censored;

  double total_reward() const;
  /// Undiscounted when gamma == 1.
  double discounted_return(double gamma) const;
  std::size_t num_transitions() const { return steps.empty() ? 0 : steps.size() - 1; }

  bool operator==(const Trajectory&) const = default;
};

struct Dataset {
  std::vector<Trajectory> trajectories;

  std::size_t size() const { return trajectories.size(); }
  bool empty() const { return trajectories.empty(); }
  double diabetic_fraction() const;
  double mean_return() const;

  bool operator==(const Dataset&) const = default;
};

/// Concatenates trajectory sets, renumbering ids of `b` after those of `a`.
Dataset concatenate(const Dataset& a, const Dataset& b);

inline constexpr int kDatasetFormatVersion = 1;

/// Line-delimited JSON: one header line, then one trajectory per line.
void write_dataset(std::ostream& out, const Dataset& data);
Dataset read_dataset(std::istream& in);
void save_dataset(const std::string& path, const Dataset& data);
Dataset load_dataset(const std::string& path);

}  // namespace cfpt::sim
