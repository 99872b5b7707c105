#include "cfpt/sim/dynamics.hpp"

#include <algorithm>
#include <cmath>

#include "cfpt/errors.hpp"

namespace cfpt::sim {

namespace {

EffectRule move(Vital v, int from, int to, double p) { return EffectRule{v, from, to, 0, p}; }
EffectRule shift(Vital v, int by, double p) { return EffectRule{v, -1, 0, by, p}; }

void check_probability(double p, const std::string& what) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw Error(ErrorCode::invalid_config, what + " = " + std::to_string(p) + " is not a probability");
  }
}

void check_rules(const std::vector<EffectRule>& rules, const std::string& what) {
  for (const auto& r : rules) {
    const int levels = kVitalLevels[static_cast<std::size_t>(r.vital)];
    check_probability(r.probability, what);
    if (r.from >= 0) {
      if (r.from >= levels || r.to < 0 || r.to >= levels) {
        throw Error(ErrorCode::invalid_config, what + ": level out of range for " + to_string(r.vital));
      }
    } else if (r.shift == 0) {
      throw Error(ErrorCode::invalid_config, what + ": shift rule with zero shift");
    }
  }
}

void apply_rules(const std::vector<EffectRule>& rules, Vital vital, std::vector<double>& dist) {
  const int levels = static_cast<int>(dist.size());
  for (const auto& rule : rules) {
    if (rule.vital != vital) continue;
    if (rule.from >= 0) {
      const double moved = dist[static_cast<std::size_t>(rule.from)] * rule.probability;
      dist[static_cast<std::size_t>(rule.from)] -= moved;
      dist[static_cast<std::size_t>(rule.to)] += moved;
    } else {
      std::vector<double> out(dist.size(), 0.0);
      for (int l = 0; l < levels; ++l) {
        const int target = std::clamp(l + rule.shift, 0, levels - 1);
        const double p = dist[static_cast<std::size_t>(l)];
        out[static_cast<std::size_t>(l)] += p * (1.0 - rule.probability);
        out[static_cast<std::size_t>(target)] += p * rule.probability;
      }
      dist = std::move(out);
    }
  }
}

Fluctuation effective_fluctuation(const DynamicsConfig& cfg, Vital vital, bool diabetic) {
  Fluctuation f = cfg.fluctuation[static_cast<std::size_t>(vital)];
  if (vital == Vital::glucose && diabetic && cfg.diabetic_glucose_multiplier != 1.0) {
    f.down *= cfg.diabetic_glucose_multiplier;
    f.up *= cfg.diabetic_glucose_multiplier;
    f.stay = 1.0 - f.down - f.up;
  }
  return f;
}

}  // namespace

void DynamicsConfig::validate() const {
  for (const auto& [fx, name] : {std::pair{&antibiotics, "antibiotics"}, std::pair{&vasopressors, "vasopressors"},
                                  std::pair{&ventilation, "ventilation"}}) {
    const std::string n = name;
    check_rules(fx->apply, n + ".apply");
    check_rules(fx->withdraw, n + ".withdraw");
    if (fx->apply_diabetic) check_rules(*fx->apply_diabetic, n + ".apply_diabetic");
    if (fx->withdraw_diabetic) check_rules(*fx->withdraw_diabetic, n + ".withdraw_diabetic");
  }
  for (std::size_t i = 0; i < kNumVitals; ++i) {
    const auto& f = fluctuation[i];
    const std::string name = std::string("fluctuation.") + to_string(static_cast<Vital>(i));
    check_probability(f.down, name + ".down");
    check_probability(f.stay, name + ".stay");
    check_probability(f.up, name + ".up");
    if (std::abs(f.down + f.stay + f.up - 1.0) > 1e-12) {
      throw Error(ErrorCode::invalid_config, name + " does not sum to 1");
    }
  }
  if (!(diabetic_glucose_multiplier >= 1.0) || !std::isfinite(diabetic_glucose_multiplier)) {
    throw Error(ErrorCode::invalid_config, "diabetic_glucose_multiplier must be >= 1");
  }
  const auto& g = fluctuation[static_cast<std::size_t>(Vital::glucose)];
  if (diabetic_glucose_multiplier * (g.down + g.up) > 1.0 + 1e-12) {
    throw Error(ErrorCode::invalid_config, "diabetic glucose drift exceeds 1 after the multiplier");
  }
  if (initial.min_abnormal < 0 || initial.max_abnormal > 2 || initial.min_abnormal > initial.max_abnormal) {
    throw Error(ErrorCode::invalid_config, "initial abnormal-vital range must satisfy 0 <= min <= max <= 2");
  }
}

DynamicsConfig DynamicsConfig::repo_default() {
  using V = Vital;
  DynamicsConfig cfg;
  cfg.antibiotics.apply = {move(V::heart_rate, level::high, level::normal, 0.5),
                           move(V::blood_pressure, level::high, level::normal, 0.5)};
  cfg.antibiotics.withdraw = {move(V::heart_rate, level::normal, level::high, 0.1),
                              move(V::blood_pressure, level::normal, level::high, 0.5)};
  cfg.antibiotics.holds = {V::heart_rate, V::blood_pressure};

  // Diabetic patients respond differently to vasopressors: a stronger push
  // upwards from low, overshooting to high some of the time, and a slower
  // relapse on withdrawal.
  cfg.vasopressors.apply = {move(V::blood_pressure, level::normal, level::high, 0.7),
                            move(V::blood_pressure, level::low, level::normal, 0.7)};
  cfg.vasopressors.apply_diabetic = std::vector<EffectRule>{
      move(V::blood_pressure, level::normal, level::high, 0.9), move(V::blood_pressure, level::low, level::high, 0.4),
      move(V::blood_pressure, level::low, level::normal, 0.5 / 0.6), shift(V::glucose, 1, 0.5)};
  cfg.vasopressors.withdraw = {move(V::blood_pressure, level::normal, level::low, 0.1),
                               move(V::blood_pressure, level::high, level::normal, 0.1)};
  cfg.vasopressors.withdraw_diabetic = std::vector<EffectRule>{
      move(V::blood_pressure, level::normal, level::low, 0.05),
      move(V::blood_pressure, level::high, level::normal, 0.05)};
  cfg.vasopressors.holds = {V::blood_pressure, V::glucose};

  cfg.ventilation.apply = {move(V::oxygen, level::low, level::normal, 0.7)};
  cfg.ventilation.withdraw = {move(V::oxygen, level::normal, level::low, 0.1)};
  cfg.ventilation.holds = {V::oxygen};

  cfg.fluctuation.fill(Fluctuation{0.1, 0.8, 0.1});
  cfg.diabetic_glucose_multiplier = 3.0;
  return cfg;
}

std::vector<double> vital_transition(const DynamicsConfig& cfg, const PatientState& state, Action action,
                                     Vital vital) {
  const auto levels = static_cast<std::size_t>(kVitalLevels[static_cast<std::size_t>(vital)]);
  std::vector<double> dist(levels, 0.0);
  dist[static_cast<std::size_t>(state.vital(vital))] = 1.0;

  bool held = false;
  auto treatment = [&](const TreatmentEffects& fx, bool was_on, bool now_on) {
    if (now_on) {
      apply_rules(state.diabetic && fx.apply_diabetic ? *fx.apply_diabetic : fx.apply, vital, dist);
      held = held || std::find(fx.holds.begin(), fx.holds.end(), vital) != fx.holds.end();
    } else if (was_on) {
      apply_rules(state.diabetic && fx.withdraw_diabetic ? *fx.withdraw_diabetic : fx.withdraw, vital, dist);
    }
  };
  treatment(cfg.antibiotics, state.abx_on, action.abx);
  treatment(cfg.vasopressors, state.vaso_on, action.vaso);
  treatment(cfg.ventilation, state.vent_on, action.vent);

  if (held) return dist;
  const Fluctuation f = effective_fluctuation(cfg, vital, state.diabetic);
  std::vector<double> out(levels, 0.0);
  for (std::size_t l = 0; l < levels; ++l) {
    const double p = dist[l];
    if (p == 0.0) continue;
    out[l] += p * f.stay;
    out[l == 0 ? 0 : l - 1] += p * f.down;
    out[l + 1 == levels ? l : l + 1] += p * f.up;
  }
  return out;
}

TransitionModel build_true_mdp(const DynamicsConfig& cfg) {
  cfg.validate();
  TransitionModel model(kNumStates, kNumActions);
  std::array<std::vector<double>, kNumVitals> marginals;
  for (std::size_t s = 0; s < kNumStates; ++s) {
    const PatientState state = decode_state(s);
    for (std::size_t a = 0; a < kNumActions; ++a) {
      const Action action = Action::from_index(a);
      for (std::size_t v = 0; v < kNumVitals; ++v) {
        marginals[v] = vital_transition(cfg, state, action, static_cast<Vital>(v));
      }
      PatientState next = state;
      next.abx_on = action.abx;
      next.vaso_on = action.vaso;
      next.vent_on = action.vent;
      // Nested loops in digit order yield ascending successor indices.
      SparseRow row;
      for (int hr = 0; hr < kVitalLevels[0]; ++hr) {
        const double p0 = marginals[0][static_cast<std::size_t>(hr)];
        if (p0 == 0.0) continue;
        for (int bp = 0; bp < kVitalLevels[1]; ++bp) {
          const double p1 = p0 * marginals[1][static_cast<std::size_t>(bp)];
          if (p1 == 0.0) continue;
          for (int o2 = 0; o2 < kVitalLevels[2]; ++o2) {
            const double p2 = p1 * marginals[2][static_cast<std::size_t>(o2)];
            if (p2 == 0.0) continue;
            for (int glu = 0; glu < kVitalLevels[3]; ++glu) {
              const double p3 = p2 * marginals[3][static_cast<std::size_t>(glu)];
              if (p3 == 0.0) continue;
              next.vitals = {hr, bp, o2, glu};
              row.next.push_back(static_cast<std::uint32_t>(encode_state(next)));
              row.prob.push_back(p3);
            }
          }
        }
      }
      // Normalize away accumulated rounding so rows sum to 1 within 1e-12.
      const double total = row.total();
      for (double& p : row.prob) p /= total;
      model.set_row(s, a, std::move(row));
    }
  }
  return model;
}

RewardTable make_reward_table(bool full_state, double penalty) {
  RewardTable table;
  table.num_states = full_state ? kNumStates : kNumObservations;
  table.num_actions = kNumActions;
  table.reward.assign(table.num_states * kNumActions, 0.0);
  table.terminal.assign(table.num_states * kNumActions, 0);
  table.penalty = penalty;
  for (std::size_t s = 0; s < table.num_states; ++s) {
    const PatientState state = decode_state(s);
    for (std::size_t a = 0; a < kNumActions; ++a) {
      const StepResult r = reward_and_termination(state, Action::from_index(a));
      table.reward[s * kNumActions + a] = r.reward;
      table.terminal[s * kNumActions + a] = r.outcome.has_value() ? 1 : 0;
    }
  }
  return table;
}

}  // namespace cfpt::sim
