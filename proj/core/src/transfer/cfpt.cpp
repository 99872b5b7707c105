#include "cfpt/transfer/cfpt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cfpt/errors.hpp"
#include "cfpt/policy/tabular.hpp"
#include "cfpt/random.hpp"
#include "cfpt/scm/rollout.hpp"
#include "cfpt/sim/dynamics.hpp"
#include "cfpt/sim/patient.hpp"

namespace cfpt::transfer {

namespace {

void check_unit(double x, const char* name) {
  if (!(x >= 0.0 && x <= 1.0)) {
    throw Error(ErrorCode::invalid_config, std::string(name) + " must lie in [0,1]");
  }
}

// First `n` entries of a seeded shuffle of 0..size-1 (partial Fisher-Yates).
std::vector<std::size_t> sample_without_replacement(std::size_t size, std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(size);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (n >= size) return idx;
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = i + static_cast<std::size_t>(uniform_open(rng) * static_cast<double>(size - i));
    std::swap(idx[i], idx[std::min(j, size - 1)]);
  }
  idx.resize(n);
  return idx;
}

policy::StochasticPolicy scratch_pi(const sim::Dataset& data, const CfptConfig& cfg, StateSpace space) {
  const EstimatedModel est = estimate_transitions(data, space);
  const RewardTable rewards = sim::make_reward_table(space == StateSpace::full_state, cfg.penalty);
  const auto domain =
      space == StateSpace::full_state ? policy::PolicyDomain::full_state : policy::PolicyDomain::observation;
  return policy::policy_iteration(est.transitions, rewards, cfg.gamma, cfg.max_pi_iter, domain).policy;
}

policy::StochasticPolicy behavior_cloning(const sim::Dataset& data) {
  std::vector<std::size_t> counts(sim::kNumObservations * sim::kNumActions, 0);
  for (const auto& traj : data.trajectories) {
    for (const auto& step : traj.steps) ++counts[step.obs * sim::kNumActions + step.action];
  }
  std::vector<std::size_t> actions(sim::kNumObservations);
  for (std::size_t o = 0; o < sim::kNumObservations; ++o) {
    const auto* row = counts.data() + o * sim::kNumActions;
    actions[o] = static_cast<std::size_t>(std::max_element(row, row + sim::kNumActions) - row);
  }
  return policy::StochasticPolicy::deterministic(actions, sim::kNumActions);
}

}  // namespace

void CfptConfig::validate() const {
  check_unit(w_target, "w_target");
  check_unit(eta, "eta");
  check_unit(lambda, "lambda");
  check_unit(epsilon, "epsilon");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw Error(ErrorCode::invalid_config, "gamma must lie in [0,1)");
  if (samples_per_trajectory == 0) throw Error(ErrorCode::invalid_config, "samples_per_trajectory must be >= 1");
  if (horizon == 0) throw Error(ErrorCode::invalid_config, "horizon must be >= 1");
  if (max_pi_iter == 0) throw Error(ErrorCode::invalid_config, "max_pi_iter must be >= 1");
  if (!std::isfinite(penalty)) throw Error(ErrorCode::invalid_config, "penalty must be finite");
  if (source_policy == SourcePolicyKind::epsilon_soft) check_unit(source_policy_param, "source policy epsilon");
  if (source_policy == SourcePolicyKind::softmax && !(source_policy_param > 0.0)) {
    throw Error(ErrorCode::invalid_config, "source policy temperature must be positive");
  }
}

std::size_t CfptConfig::resolved_batch_size(std::size_t target_size) const {
  const std::size_t n = batch_size == 0 ? std::min<std::size_t>(target_size, 2000) : batch_size;
  return std::min(n, target_size);
}

const char* to_string(CounterfactualRows rows) {
  return rows == CounterfactualRows::observed ? "observed" : "augmented";
}

std::optional<CounterfactualRows> parse_counterfactual_rows(const std::string& name) {
  if (name == "observed") return CounterfactualRows::observed;
  if (name == "augmented") return CounterfactualRows::augmented;
  return std::nullopt;
}

const char* to_string(SourcePolicyKind kind) {
  return kind == SourcePolicyKind::epsilon_soft ? "epsilon_soft" : "softmax";
}

std::optional<SourcePolicyKind> parse_source_policy_kind(const std::string& name) {
  if (name == "epsilon_soft") return SourcePolicyKind::epsilon_soft;
  if (name == "softmax") return SourcePolicyKind::softmax;
  return std::nullopt;
}

policy::StochasticPolicy make_source_policy(const EstimatedModel& source_model, const CfptConfig& cfg) {
  cfg.validate();
  const RewardTable rewards = sim::make_reward_table(false, cfg.penalty);
  const auto pi = policy::policy_iteration(source_model.transitions, rewards, cfg.gamma, cfg.max_pi_iter);
  if (cfg.source_policy == SourcePolicyKind::epsilon_soft) {
    return policy::make_behavior_policy(pi.policy, cfg.source_policy_param);
  }
  policy::StochasticPolicy out(sim::kNumObservations, sim::kNumActions);
  std::vector<double> row(sim::kNumActions);
  for (std::size_t o = 0; o < sim::kNumObservations; ++o) {
    double hi = -INFINITY;
    for (std::size_t a = 0; a < row.size(); ++a) {
      row[a] = policy::action_value(source_model.transitions, rewards, cfg.gamma, pi.values, o, a) /
               cfg.source_policy_param;
      hi = std::max(hi, row[a]);
    }
    double z = 0.0;
    for (double& r : row) z += (r = std::exp(r - hi));
    for (double& r : row) r /= z;
    out.set_row(o, row);
  }
  return out;
}

CfPiResult cf_pi(const policy::StochasticPolicy& pi0, const policy::StochasticPolicy& source_policy,
                 const EstimatedModel& source_model, const sim::Dataset& target, const CfptConfig& cfg,
                 std::uint64_t seed) {
  cfg.validate();
  if (target.empty()) throw Error(ErrorCode::empty_dataset, "cf_pi needs a nonempty target dataset");

  const EstimatedModel p_target = estimate_transitions(target);
  const RewardTable rewards = sim::make_reward_table(false, cfg.penalty);
  const std::size_t batch = cfg.resolved_batch_size(target.size());

  CfPiResult out;
  out.policy = pi0;
  TransitionModel augmented = p_target.transitions;
  for (std::size_t k = 1; k <= cfg.iterations; ++k) {
    const std::uint64_t iter_seed = derive_seed(seed, static_cast<std::uint64_t>(k));
    Rng pick = make_rng(derive_seed(iter_seed, "batch"));
    const std::vector<std::size_t> chosen = sample_without_replacement(target.size(), batch, pick);

    const scm::RolloutModels models{
        &source_model.transitions, &p_target.transitions,
        cfg.cf_rows == CounterfactualRows::observed ? &p_target.transitions : &augmented, cfg.w_target,
        cfg.penalty};
    const scm::RolloutOptions options{cfg.horizon, false};
    scm::RolloutStats stats;
    sim::Dataset cf_batch;
    cf_batch.trajectories.reserve(chosen.size() * cfg.samples_per_trajectory);
    CfPiIteration it;
    std::size_t penalties = 0;
    for (std::size_t i : chosen) {
      for (std::size_t r = 0; r < cfg.samples_per_trajectory; ++r) {
        Rng rng = make_rng(derive_seed(iter_seed, static_cast<std::uint64_t>(i * cfg.samples_per_trajectory + r)));
        sim::Trajectory t = scm::counterfactual_rollout(target.trajectories[i], out.policy, models, options, rng,
                                                        &stats);
        it.mean_cf_return += t.total_reward();
        if (t.outcome == sim::TerminalOutcome::penalty) ++penalties;
        cf_batch.trajectories.push_back(std::move(t));
      }
    }
    it.mean_cf_return /= static_cast<double>(cf_batch.size());
    it.penalty_fraction = static_cast<double>(penalties) / static_cast<double>(cf_batch.size());
    it.fallbacks = stats.fallbacks;

    const EstimatedModel p_hat = estimate_transitions(cf_batch);
    augmented = augment_transitions(p_target.transitions, p_hat.transitions, cfg.eta);
    auto reg = policy::reg_pi(out.policy, cfg.gamma, augmented, rewards, source_policy, cfg.lambda, cfg.max_pi_iter);
    out.policy = std::move(reg.policy);
    it.reg_pi_iterations = reg.iterations;
    it.reg_pi_cycle = reg.cycle_length;
    out.trace.push_back(it);
    if (k == cfg.iterations) out.last_batch = std::move(cf_batch);
  }
  return out;
}

const char* to_string(Method m) {
  switch (m) {
    case Method::random: return "random";
    case Method::scratch: return "scratch";
    case Method::pooled: return "pooled";
    case Method::blind: return "blind";
    case Method::regpi: return "regpi";
    case Method::red_cfpt: return "red_cfpt";
    case Method::cfpt: return "cfpt";
    case Method::bc: return "bc";
    case Method::full_obs: return "full_obs";
  }
  return "unknown";
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods{Method::random, Method::scratch, Method::pooled,
                                           Method::blind,  Method::regpi,   Method::red_cfpt,
                                           Method::cfpt,   Method::bc,      Method::full_obs};
  return methods;
}

std::optional<Method> parse_method(const std::string& name) {
  for (Method m : all_methods()) {
    if (name == to_string(m)) return m;
  }
  return std::nullopt;
}

std::vector<std::string> missing_inputs(Method m, const TransferInputs& in) {
  std::vector<std::string> missing;
  auto need = [&](bool ok, const char* what) {
    if (!ok) missing.emplace_back(what);
  };
  switch (m) {
    case Method::random:
      break;
    case Method::scratch:
    case Method::bc:
    case Method::full_obs:
      need(in.target_data != nullptr, "target dataset");
      break;
    case Method::pooled:
      need(in.target_data != nullptr, "target dataset");
      need(in.source_data != nullptr, "source dataset");
      break;
    case Method::blind:
      need(in.source_policy != nullptr, "source policy");
      break;
    case Method::regpi:
      need(in.target_data != nullptr, "target dataset");
      need(in.source_policy != nullptr, "source policy");
      break;
    case Method::red_cfpt:
    case Method::cfpt:
      need(in.target_data != nullptr, "target dataset");
      need(in.source_policy != nullptr, "source policy");
      need(in.source_model != nullptr, "source transition estimate");
      break;
  }
  return missing;
}

policy::StochasticPolicy run_baseline(Method m, const TransferInputs& in, const CfptConfig& cfg, std::uint64_t seed) {
  const auto missing = missing_inputs(m, in);
  if (!missing.empty()) {
    std::string msg = std::string(to_string(m)) + " is missing:";
    for (const auto& s : missing) msg += " " + s + ";";
    throw Error(ErrorCode::configuration, msg);
  }
  cfg.validate();
  switch (m) {
    case Method::random:
      return policy::StochasticPolicy::uniform(sim::kNumObservations, sim::kNumActions);
    case Method::scratch:
      return scratch_pi(*in.target_data, cfg, StateSpace::observation);
    case Method::pooled:
      return scratch_pi(sim::concatenate(*in.source_data, *in.target_data), cfg, StateSpace::observation);
    case Method::blind:
      return *in.source_policy;
    case Method::regpi: {
      const EstimatedModel p_target = estimate_transitions(*in.target_data);
      const RewardTable rewards = sim::make_reward_table(false, cfg.penalty);
      const auto pi0 = policy::StochasticPolicy::uniform(sim::kNumObservations, sim::kNumActions);
      return policy::reg_pi(pi0, cfg.gamma, p_target.transitions, rewards, *in.source_policy, cfg.lambda,
                            cfg.max_pi_iter)
          .policy;
    }
    case Method::red_cfpt:
    case Method::cfpt: {
      CfptConfig c = cfg;
      if (m == Method::red_cfpt) c.w_target = 1.0;
      const auto pi0 = policy::StochasticPolicy::uniform(sim::kNumObservations, sim::kNumActions);
      return cf_pi(pi0, *in.source_policy, *in.source_model, *in.target_data, c, seed).policy;
    }
    case Method::bc:
      return behavior_cloning(*in.target_data);
    case Method::full_obs:
      return scratch_pi(*in.target_data, cfg, StateSpace::full_state);
  }
  throw Error(ErrorCode::configuration, "unknown method");
}

}  // namespace cfpt::transfer
