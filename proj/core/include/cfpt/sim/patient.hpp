#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

namespace cfpt::sim {

enum class Vital { heart_rate = 0, blood_pressure = 1, oxygen = 2, glucose = 3 };

inline constexpr std::size_t kNumVitals = 4;
inline constexpr std::array<int, kNumVitals> kVitalLevels{3, 3, 2, 5};
inline constexpr std::array<int, kNumVitals> kNormalLevel{1, 1, 1, 2};

inline constexpr std::size_t kNumObservations = 720;
inline constexpr std::size_t kNumStates = 2 * kNumObservations;
inline constexpr std::size_t kNumActions = 8;

// Level names, lowest first.
namespace level {
inline constexpr int low = 0;
inline constexpr int normal = 1;
inline constexpr int high = 2;
inline constexpr int very_low_glucose = 0;
inline constexpr int low_glucose = 1;
inline constexpr int normal_glucose = 2;
inline constexpr int high_glucose = 3;
inline constexpr int very_high_glucose = 4;
}  // namespace level

const char* to_string(Vital vital);
std::optional<Vital> parse_vital(const std::string& name);

struct PatientState {
  std::array<int, kNumVitals> vitals{level::normal, level::normal, level::normal, level::normal_glucose};
  bool abx_on = false;
  bool vaso_on = false;
  bool vent_on = false;
  bool diabetic = false;

  int vital(Vital v) const { return vitals[static_cast<std::size_t>(v)]; }
  int& vital(Vital v) { return vitals[static_cast<std::size_t>(v)]; }

  int num_abnormal() const;
  bool all_normal() const { return num_abnormal() == 0; }

  bool operator==(const PatientState&) const = default;
};

/// Joint treatment decision: each of antibiotics, vasopressors and mechanical
/// ventilation on or off. Index = 4*abx + 2*vaso + vent.
struct Action {
  bool abx = false;
  bool vaso = false;
  bool vent = false;

  std::size_t index() const { return (abx ? 4u : 0u) + (vaso ? 2u : 0u) + (vent ? 1u : 0u); }
  static Action from_index(std::size_t index);
  bool any() const { return abx || vaso || vent; }

  bool operator==(const Action&) const = default;
};

std::string action_name(std::size_t action);

/// Mixed-radix state index in [0, 1440). Digits, most significant first:
/// diabetic, heart rate, blood pressure, oxygen, glucose, abx, vaso, vent.
/// Throws Error(invalid_argument) when a component is out of range.
std::size_t encode_state(const PatientState& state);
PatientState decode_state(std::size_t index);

/// Observation index in [0, 720): the state index with the diabetic digit removed.
std::size_t encode_observation(const PatientState& state);
inline std::size_t observation_of(std::size_t state) { return state % kNumObservations; }
inline std::size_t state_of(std::size_t observation, bool diabetic) {
  return observation + (diabetic ? kNumObservations : 0);
}

enum class TerminalOutcome { discharge, death, censored, penalty };

const char* to_string(TerminalOutcome outcome);
std::optional<TerminalOutcome> parse_outcome(const std::string& name);

struct StepResult {
  double reward = 0.0;
  std::optional<TerminalOutcome> outcome;  // empty: episode continues
};

/// Death (-1) when three or more vitals are abnormal; discharge (+1) when all
/// vitals are normal and the action switches every treatment off; otherwise 0.
StepResult reward_and_termination(const PatientState& state, Action action);

}  // namespace cfpt::sim
