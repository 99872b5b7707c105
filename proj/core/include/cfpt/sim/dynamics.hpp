#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "cfpt/model.hpp"
#include "cfpt/sim/patient.hpp"

namespace cfpt::sim {

/// One stochastic treatment effect on a vital. With `from` >= 0 the rule moves
/// the mass sitting at level `from` to level `to` with `probability`. With
/// `from` < 0 the rule shifts every level by `shift` (clamped at the range
/// ends) with `probability`.
struct EffectRule {
  Vital vital = Vital::heart_rate;
  int from = -1;
  int to = 0;
  int shift = 0;
  double probability = 0.0;

  bool operator==(const EffectRule&) const = default;
};

/// Rules fired while a treatment is given ("apply") and on the step it is
/// switched off ("withdraw"). Diabetic patients use the *_diabetic lists when
/// present. Vitals listed in `holds` skip their random drift while the
/// treatment is given.
struct TreatmentEffects {
  std::vector<EffectRule> apply;
  std::vector<EffectRule> withdraw;
  std::optional<std::vector<EffectRule>> apply_diabetic;
  std::optional<std::vector<EffectRule>> withdraw_diabetic;
  std::vector<Vital> holds;

  bool operator==(const TreatmentEffects&) const = default;
};

/// Per-step random drift of a vital by one level; the three masses sum to 1.
struct Fluctuation {
  double down = 0.0;
  double stay = 1.0;
  double up = 0.0;

  bool operator==(const Fluctuation&) const = default;
};

struct InitialStateConfig {
  // Start states are uniform over vital configurations whose number of
  // abnormal vitals lies in [min_abnormal, max_abnormal], all treatments off.
  int min_abnormal = 0;
  int max_abnormal = 2;

  bool operator==(const InitialStateConfig&) const = default;
};

struct DynamicsConfig {
  TreatmentEffects antibiotics;
  TreatmentEffects vasopressors;
  TreatmentEffects ventilation;
  std::array<Fluctuation, kNumVitals> fluctuation{};
  // Scales glucose drift (down and up) for diabetic patients; stay mass is
  // renormalized.
  double diabetic_glucose_multiplier = 1.0;
  InitialStateConfig initial;

  /// Throws Error(invalid_config) on probabilities outside [0,1], drift rows
  /// not summing to 1, a multiplier below 1 or one that drives stay below 0.
  void validate() const;

  /// Shipped hand-tuned defaults; identical to configs/dynamics.yaml.
  static DynamicsConfig repo_default();

  bool operator==(const DynamicsConfig&) const = default;
};

DynamicsConfig parse_dynamics_config(const std::string& yaml_text);
DynamicsConfig load_dynamics_config(const std::string& path);
std::string dynamics_config_to_yaml(const DynamicsConfig& cfg);

/// Next-level distribution of one vital for a given state and action.
std::vector<double> vital_transition(const DynamicsConfig& cfg, const PatientState& state, Action action,
                                     Vital vital);

/// Ground-truth 1440 x 8 transition model. Throws Error(invalid_config) for an
/// invalid config.
TransitionModel build_true_mdp(const DynamicsConfig& cfg);

/// Rewards and terminal flags over full states (1440 rows) or observations
/// (720 rows). Both depend only on vitals and the action.
RewardTable make_reward_table(bool full_state, double penalty = -1.0);

}  // namespace cfpt::sim
