#include "cfpt/sim/patient.hpp"

#include "cfpt/errors.hpp"

namespace cfpt::sim {

const char* to_string(Vital vital) {
  switch (vital) {
    case Vital::heart_rate: return "heart_rate";
    case Vital::blood_pressure: return "blood_pressure";
    case Vital::oxygen: return "oxygen";
    case Vital::glucose: return "glucose";
  }
  return "?";
}

std::optional<Vital> parse_vital(const std::string& name) {
  for (std::size_t i = 0; i < kNumVitals; ++i) {
    if (name == to_string(static_cast<Vital>(i))) return static_cast<Vital>(i);
  }
  return std::nullopt;
}

int PatientState::num_abnormal() const {
  int count = 0;
  for (std::size_t i = 0; i < kNumVitals; ++i) count += vitals[i] != kNormalLevel[i] ? 1 : 0;
  return count;
}

Action Action::from_index(std::size_t index) {
  if (index >= kNumActions) throw Error(ErrorCode::invalid_argument, "action index out of range");
  return Action{(index & 4u) != 0, (index & 2u) != 0, (index & 1u) != 0};
}

std::string action_name(std::size_t action) {
  const Action a = Action::from_index(action);
  if (!a.any()) return "none";
  std::string name;
  auto add = [&name](const char* part) {
    if (!name.empty()) name += '+';
    name += part;
  };
  if (a.abx) add("abx");
  if (a.vaso) add("vaso");
  if (a.vent) add("vent");
  return name;
}

std::size_t encode_observation(const PatientState& state) {
  std::size_t index = 0;
  for (std::size_t i = 0; i < kNumVitals; ++i) {
    const int v = state.vitals[i];
    if (v < 0 || v >= kVitalLevels[i]) {
      throw Error(ErrorCode::invalid_argument,
                  std::string("level ") + std::to_string(v) + " out of range for " + to_string(static_cast<Vital>(i)));
    }
    index = index * static_cast<std::size_t>(kVitalLevels[i]) + static_cast<std::size_t>(v);
  }
  index = index * 2 + (state.abx_on ? 1 : 0);
  index = index * 2 + (state.vaso_on ? 1 : 0);
  index = index * 2 + (state.vent_on ? 1 : 0);
  return index;
}

std::size_t encode_state(const PatientState& state) { return state_of(encode_observation(state), state.diabetic); }

PatientState decode_state(std::size_t index) {
  if (index >= kNumStates) throw Error(ErrorCode::invalid_argument, "state index out of range");
  PatientState s;
  s.diabetic = index >= kNumObservations;
  std::size_t rest = index % kNumObservations;
  s.vent_on = rest % 2 != 0;
  rest /= 2;
  s.vaso_on = rest % 2 != 0;
  rest /= 2;
  s.abx_on = rest % 2 != 0;
  rest /= 2;
  for (std::size_t i = kNumVitals; i-- > 0;) {
    const auto radix = static_cast<std::size_t>(kVitalLevels[i]);
    s.vitals[i] = static_cast<int>(rest % radix);
    rest /= radix;
  }
  return s;
}

const char* to_string(TerminalOutcome outcome) {
  switch (outcome) {
    case TerminalOutcome::discharge: return "discharge";
    case TerminalOutcome::death: return "death";
    case TerminalOutcome::censored: return "censored";
    case TerminalOutcome::penalty: return "penalty";
  }
  return "?";
}

std::optional<TerminalOutcome> parse_outcome(const std::string& name) {
  for (auto o : {TerminalOutcome::discharge, TerminalOutcome::death, TerminalOutcome::censored,
                 TerminalOutcome::penalty}) {
    if (name == to_string(o)) return o;
  }
  return std::nullopt;
}

StepResult reward_and_termination(const PatientState& state, Action action) {
  const int abnormal = state.num_abnormal();
  if (abnormal >= 3) return {-1.0, TerminalOutcome::death};
  if (abnormal == 0 && !action.any()) return {1.0, TerminalOutcome::discharge};
  return {0.0, std::nullopt};
}

}  // namespace cfpt::sim
