#include "cfpt/eval/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <json.hpp>

#include "cfpt/errors.hpp"
#include "cfpt/scm/rollout.hpp"
#include "cfpt/sim/patient.hpp"

namespace cfpt::eval {

namespace {

double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

void add_outcome(OutcomeFractions& f, sim::TerminalOutcome o) { f[static_cast<std::size_t>(o)] += 1.0; }

void normalize(OutcomeFractions& f, std::size_t n) {
  if (n == 0) return;
  for (double& x : f) x /= static_cast<double>(n);
}

}  // namespace

Interval bootstrap_ci(std::span<const double> values, std::size_t resamples, Rng& rng, double level) {
  if (values.empty()) throw Error(ErrorCode::invalid_argument, "bootstrap of an empty sample");
  if (resamples == 0) throw Error(ErrorCode::invalid_argument, "bootstrap needs at least one resample");
  const std::size_t n = values.size();
  std::vector<double> means(resamples);
  for (double& m : means) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto j = static_cast<std::size_t>(uniform_open(rng) * static_cast<double>(n));
      s += values[std::min(j, n - 1)];
    }
    m = s / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  const double tail = (1.0 - level) / 2.0;
  return {quantile(means, tail), quantile(means, 1.0 - tail)};
}

EvalReport summarize(const sim::Dataset& rollouts, std::size_t bootstrap, std::uint64_t seed, double gamma) {
  if (rollouts.empty()) throw Error(ErrorCode::empty_dataset, "nothing to summarize");
  EvalReport r;
  r.n_trajectories = rollouts.size();
  std::vector<double> returns;
  returns.reserve(rollouts.size());
  for (const auto& t : rollouts.trajectories) {
    const double g = t.discounted_return(gamma);
    returns.push_back(g);
    r.mean_return += g;
    add_outcome(r.outcomes, t.outcome);
    SubpopulationReport& sub = t.diabetic ? r.diabetic : r.non_diabetic;
    ++sub.n_trajectories;
    sub.mean_return += g;
    add_outcome(sub.outcomes, t.outcome);
  }
  r.mean_return /= static_cast<double>(r.n_trajectories);
  normalize(r.outcomes, r.n_trajectories);
  for (SubpopulationReport* sub : {&r.diabetic, &r.non_diabetic}) {
    if (sub->n_trajectories > 0) sub->mean_return /= static_cast<double>(sub->n_trajectories);
    normalize(sub->outcomes, sub->n_trajectories);
  }
  Rng rng = make_rng(seed);
  const Interval ci = bootstrap_ci(returns, bootstrap, rng);
  r.ci_low = std::min(ci.low, r.mean_return);
  r.ci_high = std::max(ci.high, r.mean_return);
  return r;
}

EvalReport true_reward(const policy::StochasticPolicy& policy, const sim::SepsisSimulator& simulator, std::size_t n,
                       std::uint64_t seed, const TrueRewardOptions& options) {
  if (n == 0) throw Error(ErrorCode::invalid_argument, "true_reward needs at least one rollout");
  const sim::Dataset rollouts =
      sim::generate_dataset(simulator, policy, n, options.p_diab, options.horizon, derive_seed(seed, "rollouts"));
  return summarize(rollouts, options.bootstrap, derive_seed(seed, "bootstrap"), options.gamma);
}

policy::StochasticPolicy estimate_behavior_policy(const sim::Dataset& data, double pseudo_count) {
  if (!(pseudo_count >= 0.0)) throw Error(ErrorCode::invalid_argument, "pseudo count must be nonnegative");
  std::vector<double> counts(sim::kNumObservations * sim::kNumActions, pseudo_count);
  for (const auto& t : data.trajectories) {
    for (const auto& s : t.steps) counts[s.obs * sim::kNumActions + s.action] += 1.0;
  }
  for (std::size_t o = 0; o < sim::kNumObservations; ++o) {
    double z = 0.0;
    for (std::size_t a = 0; a < sim::kNumActions; ++a) z += counts[o * sim::kNumActions + a];
    for (std::size_t a = 0; a < sim::kNumActions; ++a) {
      auto& c = counts[o * sim::kNumActions + a];
      c = z > 0.0 ? c / z : 1.0 / static_cast<double>(sim::kNumActions);
    }
  }
  return policy::StochasticPolicy::from_matrix(sim::kNumObservations, sim::kNumActions, std::move(counts));
}

double wis(const sim::Dataset& data, const policy::StochasticPolicy& pi_eval, const policy::StochasticPolicy& mu_hat,
           double gamma) {
  if (data.empty()) throw Error(ErrorCode::empty_dataset, "WIS of an empty dataset");
  double num = 0.0;
  double den = 0.0;
  for (const auto& t : data.trajectories) {
    double w = 1.0;
    for (std::size_t i = 0; i < t.steps.size(); ++i) {
      const auto& s = t.steps[i];
      const double mu = mu_hat.prob(sim::policy_row(mu_hat, s.state), s.action);
      if (!(mu > 0.0)) {
        throw Error(ErrorCode::undefined_weight, "behavior policy has no mass on action " +
                                                     std::to_string(s.action) + " at step " + std::to_string(i) +
                                                     " of trajectory " + std::to_string(t.id));
      }
      w *= pi_eval.prob(sim::policy_row(pi_eval, s.state), s.action) / mu;
    }
    num += w * t.discounted_return(gamma);
    den += w;
  }
  if (!(den > 0.0)) throw Error(ErrorCode::undefined_weight, "every trajectory has zero importance weight");
  return num / den;
}

CfPeReport cf_pe(const sim::Dataset& data, const policy::StochasticPolicy& pi_eval, const TransitionModel& target_model,
                 const TransitionModel* source_model, const CfPeOptions& options, std::uint64_t seed) {
  if (data.empty()) throw Error(ErrorCode::empty_dataset, "CF-PE of an empty dataset");
  if (options.w_target < 1.0 && source_model == nullptr) {
    throw Error(ErrorCode::configuration, "CF-PE with a source mixture needs a source model");
  }
  const scm::RolloutModels models{source_model, &target_model, &target_model, options.w_target, options.penalty};
  const scm::RolloutOptions ro{options.horizon, options.replay_observed_actions};
  CfPeReport out;
  out.records.reserve(data.size());
  out.counterfactuals.trajectories.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& obs = data.trajectories[i];
    Rng rng = make_rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    sim::Trajectory cf = scm::counterfactual_rollout(obs, pi_eval, models, ro, rng);
    CfPeRecord rec{obs.id, obs.diabetic, obs.outcome, cf.outcome, obs.total_reward(), cf.total_reward()};
    if (rec.cf_outcome == rec.observed_outcome) ++out.unchanged;
    out.records.push_back(rec);
    out.counterfactuals.trajectories.push_back(std::move(cf));
  }
  out.summary = summarize(out.counterfactuals, options.bootstrap, derive_seed(seed, "bootstrap"));
  return out;
}

std::vector<bool> FeatureHistogram::support() const {
  std::vector<bool> s(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) s[i] = counts[i] > 0;
  return s;
}

std::vector<FeatureHistogram> visitation_histogram(const sim::Dataset& data) {
  std::vector<FeatureHistogram> h;
  for (std::size_t v = 0; v < sim::kNumVitals; ++v) {
    h.push_back({sim::to_string(static_cast<sim::Vital>(v)),
                 std::vector<std::size_t>(static_cast<std::size_t>(sim::kVitalLevels[v]), 0), {}});
  }
  for (const char* name : {"antibiotics", "vasopressors", "ventilation"}) {
    h.push_back({name, std::vector<std::size_t>(2, 0), {}});
  }
  std::size_t total = 0;
  for (const auto& t : data.trajectories) {
    for (const auto& step : t.steps) {
      const sim::PatientState p = sim::decode_state(step.state);
      for (std::size_t v = 0; v < sim::kNumVitals; ++v) ++h[v].counts[static_cast<std::size_t>(p.vitals[v])];
      ++h[4].counts[p.abx_on ? 1 : 0];
      ++h[5].counts[p.vaso_on ? 1 : 0];
      ++h[6].counts[p.vent_on ? 1 : 0];
      ++total;
    }
  }
  if (total == 0) throw Error(ErrorCode::empty_dataset, "no steps to histogram");
  for (auto& f : h) {
    f.frequency.resize(f.counts.size());
    for (std::size_t i = 0; i < f.counts.size(); ++i) {
      f.frequency[i] = static_cast<double>(f.counts[i]) / static_cast<double>(total);
    }
  }
  return h;
}

bool support_contains(const std::vector<FeatureHistogram>& outer, const std::vector<FeatureHistogram>& inner) {
  if (outer.size() != inner.size()) return false;
  for (std::size_t f = 0; f < inner.size(); ++f) {
    if (outer[f].counts.size() != inner[f].counts.size()) return false;
    for (std::size_t i = 0; i < inner[f].counts.size(); ++i) {
      if (inner[f].counts[i] > 0 && outer[f].counts[i] == 0) return false;
    }
  }
  return true;
}

namespace {

nlohmann::json outcomes_json(const OutcomeFractions& f) {
  nlohmann::json j;
  for (std::size_t i = 0; i < f.size(); ++i) j[sim::to_string(static_cast<sim::TerminalOutcome>(i))] = f[i];
  return j;
}

OutcomeFractions outcomes_from(const nlohmann::json& j) {
  OutcomeFractions f{};
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = j.at(sim::to_string(static_cast<sim::TerminalOutcome>(i)));
  return f;
}

nlohmann::json sub_json(const SubpopulationReport& s) {
  return {{"n_trajectories", s.n_trajectories}, {"mean_return", s.mean_return}, {"outcomes", outcomes_json(s.outcomes)}};
}

SubpopulationReport sub_from(const nlohmann::json& j) {
  return {j.at("n_trajectories"), j.at("mean_return"), outcomes_from(j.at("outcomes"))};
}

}  // namespace

std::string report_to_json(const EvalReport& r, int indent) {
  const nlohmann::json j{{"mean_return", r.mean_return},
                         {"ci_low", r.ci_low},
                         {"ci_high", r.ci_high},
                         {"n_trajectories", r.n_trajectories},
                         {"outcomes", outcomes_json(r.outcomes)},
                         {"diabetic", sub_json(r.diabetic)},
                         {"non_diabetic", sub_json(r.non_diabetic)}};
  return j.dump(indent);
}

EvalReport report_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    EvalReport r;
    r.mean_return = j.at("mean_return");
    r.ci_low = j.at("ci_low");
    r.ci_high = j.at("ci_high");
    r.n_trajectories = j.at("n_trajectories");
    r.outcomes = outcomes_from(j.at("outcomes"));
    r.diabetic = sub_from(j.at("diabetic"));
    r.non_diabetic = sub_from(j.at("non_diabetic"));
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::io, std::string("bad report JSON: ") + e.what());
  }
}

}  // namespace cfpt::eval
