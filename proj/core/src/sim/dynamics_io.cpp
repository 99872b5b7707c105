#include <fstream>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "cfpt/errors.hpp"
#include "cfpt/sim/dynamics.hpp"

namespace cfpt::sim {

namespace {

const std::vector<std::string>& level_names(Vital v) {
  static const std::vector<std::string> three{"low", "normal", "high"};
  static const std::vector<std::string> two{"low", "normal"};
  static const std::vector<std::string> glucose{"very_low", "low", "normal", "high", "very_high"};
  switch (v) {
    case Vital::oxygen: return two;
    case Vital::glucose: return glucose;
    default: return three;
  }
}

int parse_level(Vital v, const YAML::Node& node) {
  const auto text = node.as<std::string>();
  const auto& names = level_names(v);
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == text) return static_cast<int>(i);
  }
  try {
    return node.as<int>();
  } catch (const YAML::Exception&) {
    throw Error(ErrorCode::invalid_config, "unknown level '" + text + "' for " + to_string(v));
  }
}

std::vector<EffectRule> parse_rules(const YAML::Node& node, const std::string& where) {
  std::vector<EffectRule> rules;
  if (!node) return rules;
  if (!node.IsSequence()) throw Error(ErrorCode::invalid_config, where + " must be a list of rules");
  for (const auto& item : node) {
    EffectRule rule;
    const auto vital = parse_vital(item["vital"].as<std::string>(""));
    if (!vital) throw Error(ErrorCode::invalid_config, where + ": missing or unknown vital");
    rule.vital = *vital;
    rule.probability = item["p"].as<double>(-1.0);
    if (item["shift"]) {
      rule.from = -1;
      rule.shift = item["shift"].as<int>();
    } else {
      if (!item["from"] || !item["to"]) throw Error(ErrorCode::invalid_config, where + ": rule needs from/to or shift");
      rule.from = parse_level(rule.vital, item["from"]);
      rule.to = parse_level(rule.vital, item["to"]);
    }
    rules.push_back(rule);
  }
  return rules;
}

void parse_treatment(const YAML::Node& node, const std::string& name, TreatmentEffects& fx) {
  if (!node) return;
  if (node["apply"]) fx.apply = parse_rules(node["apply"], name + ".apply");
  if (node["withdraw"]) fx.withdraw = parse_rules(node["withdraw"], name + ".withdraw");
  if (node["apply_diabetic"]) fx.apply_diabetic = parse_rules(node["apply_diabetic"], name + ".apply_diabetic");
  if (node["withdraw_diabetic"]) {
    fx.withdraw_diabetic = parse_rules(node["withdraw_diabetic"], name + ".withdraw_diabetic");
  }
  if (const auto holds = node["holds"]) {
    fx.holds.clear();
    for (const auto& h : holds) {
      const auto v = parse_vital(h.as<std::string>());
      if (!v) throw Error(ErrorCode::invalid_config, name + ".holds: unknown vital " + h.as<std::string>());
      fx.holds.push_back(*v);
    }
  }
}

YAML::Node emit_rules(const std::vector<EffectRule>& rules) {
  YAML::Node seq(YAML::NodeType::Sequence);
  for (const auto& r : rules) {
    YAML::Node item;
    item.SetStyle(YAML::EmitterStyle::Flow);
    item["vital"] = to_string(r.vital);
    if (r.from >= 0) {
      item["from"] = level_names(r.vital)[static_cast<std::size_t>(r.from)];
      item["to"] = level_names(r.vital)[static_cast<std::size_t>(r.to)];
    } else {
      item["shift"] = r.shift;
    }
    item["p"] = r.probability;
    seq.push_back(item);
  }
  return seq;
}

}  // namespace

DynamicsConfig parse_dynamics_config(const std::string& yaml_text) {
  DynamicsConfig cfg = DynamicsConfig::repo_default();
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
    if (root["dynamics"]) root = root["dynamics"];
    parse_treatment(root["antibiotics"], "antibiotics", cfg.antibiotics);
    parse_treatment(root["vasopressors"], "vasopressors", cfg.vasopressors);
    parse_treatment(root["ventilation"], "ventilation", cfg.ventilation);
    if (const auto fl = root["fluctuation"]) {
      for (std::size_t i = 0; i < kNumVitals; ++i) {
        const auto node = fl[to_string(static_cast<Vital>(i))];
        if (!node) continue;
        auto& f = cfg.fluctuation[i];
        f.down = node["down"].as<double>(f.down);
        f.up = node["up"].as<double>(f.up);
        f.stay = node["stay"] ? node["stay"].as<double>() : 1.0 - f.down - f.up;
      }
    }
    cfg.diabetic_glucose_multiplier =
        root["diabetic_glucose_multiplier"].as<double>(cfg.diabetic_glucose_multiplier);
    if (const auto init = root["initial"]) {
      cfg.initial.min_abnormal = init["min_abnormal"].as<int>(cfg.initial.min_abnormal);
      cfg.initial.max_abnormal = init["max_abnormal"].as<int>(cfg.initial.max_abnormal);
    }
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::invalid_config, std::string("dynamics config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

DynamicsConfig load_dynamics_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open dynamics config " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_dynamics_config(buffer.str());
}

std::string dynamics_config_to_yaml(const DynamicsConfig& cfg) {
  YAML::Node root;
  auto treatment = [](const TreatmentEffects& fx) {
    YAML::Node node;
    node["apply"] = emit_rules(fx.apply);
    node["withdraw"] = emit_rules(fx.withdraw);
    if (fx.apply_diabetic) node["apply_diabetic"] = emit_rules(*fx.apply_diabetic);
    if (fx.withdraw_diabetic) node["withdraw_diabetic"] = emit_rules(*fx.withdraw_diabetic);
    YAML::Node holds(YAML::NodeType::Sequence);
    holds.SetStyle(YAML::EmitterStyle::Flow);
    for (Vital v : fx.holds) holds.push_back(to_string(v));
    node["holds"] = holds;
    return node;
  };
  root["antibiotics"] = treatment(cfg.antibiotics);
  root["vasopressors"] = treatment(cfg.vasopressors);
  root["ventilation"] = treatment(cfg.ventilation);
  for (std::size_t i = 0; i < kNumVitals; ++i) {
    YAML::Node f;
    f.SetStyle(YAML::EmitterStyle::Flow);
    f["down"] = cfg.fluctuation[i].down;
    f["stay"] = cfg.fluctuation[i].stay;
    f["up"] = cfg.fluctuation[i].up;
    root["fluctuation"][to_string(static_cast<Vital>(i))] = f;
  }
  root["diabetic_glucose_multiplier"] = cfg.diabetic_glucose_multiplier;
  root["initial"]["min_abnormal"] = cfg.initial.min_abnormal;
  root["initial"]["max_abnormal"] = cfg.initial.max_abnormal;
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << root;
  return std::string(out.c_str()) + "\n";
}

}  // namespace cfpt::sim
