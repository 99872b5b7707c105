#include "cfpt/policy/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>

#include "cfpt/errors.hpp"

namespace cfpt::policy {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_gamma(double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) {
    throw Error(ErrorCode::invalid_argument, "discount must lie in [0,1), got " + std::to_string(gamma));
  }
}

void check_shapes(const TransitionModel& model, const RewardTable& rewards) {
  if (rewards.num_states != model.num_states() || rewards.num_actions != model.num_actions()) {
    throw Error(ErrorCode::invalid_argument, "reward table and transition model disagree on shape");
  }
}

void check_policy_shape(const StochasticPolicy& pi, const TransitionModel& model) {
  if (pi.num_rows() != model.num_states() || pi.num_actions() != model.num_actions()) {
    throw Error(ErrorCode::invalid_argument, "policy shape does not match the transition model");
  }
}

bool available(const TransitionModel& model, const RewardTable& rewards, std::size_t s, std::size_t a) {
  return rewards.is_terminal(s, a) || model.supported(s, a);
}

// Nonzero (action, prob) pairs per state, so deterministic policies cost one
// backup per state per sweep.
struct SparsePolicy {
  std::vector<std::size_t> offset;
  std::vector<std::pair<std::size_t, double>> entries;

  explicit SparsePolicy(const StochasticPolicy& pi) {
    offset.reserve(pi.num_rows() + 1);
    offset.push_back(0);
    for (std::size_t s = 0; s < pi.num_rows(); ++s) {
      const auto row = pi.row(s);
      for (std::size_t a = 0; a < row.size(); ++a) {
        if (row[a] > 0.0) entries.emplace_back(a, row[a]);
      }
      offset.push_back(entries.size());
    }
  }
};

double backup(const SparsePolicy& sp, const TransitionModel& model, const RewardTable& rewards, double gamma,
              std::span<const double> values, std::size_t s) {
  double v = 0.0;
  for (std::size_t i = sp.offset[s]; i < sp.offset[s + 1]; ++i) {
    const auto [a, p] = sp.entries[i];
    v += p * action_value(model, rewards, gamma, values, s, a);
  }
  return v;
}

// Gauss-Seidel update that solves the self-transition exactly:
// V(s) = (rest) / (1 - gamma * P(s | s, pi)). Long self-loops otherwise
// dominate the number of sweeps.
double solve_state(const SparsePolicy& sp, const TransitionModel& model, const RewardTable& rewards, double gamma,
                   std::span<const double> values, std::size_t s) {
  double rest = 0.0;
  double self = 0.0;
  for (std::size_t i = sp.offset[s]; i < sp.offset[s + 1]; ++i) {
    const auto [a, p] = sp.entries[i];
    if (rewards.is_terminal(s, a)) {
      rest += p * rewards.at(s, a);
      continue;
    }
    if (!model.supported(s, a)) {
      rest += p * rewards.penalty;
      continue;
    }
    const SparseRow& row = model.row(s, a);
    double ev = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (row.next[j] == s) {
        self += p * row.prob[j];
      } else {
        ev += row.prob[j] * values[row.next[j]];
      }
    }
    rest += p * (rewards.at(s, a) + gamma * ev);
  }
  return rest / (1.0 - gamma * self);
}

// Shared evaluate/improve loop. `improve` fills a deterministic action per
// state from the current values. The improvement is a deterministic function
// of the values, so a regularized improvement that does not settle revisits an
// earlier policy and then repeats a cycle. On a revisit the loop stops and
// keeps the cycle member with the largest total value.
template <typename Improve>
void iterate(StochasticPolicy& pi, ValueFunction& values, std::size_t& iterations, bool& converged,
             std::size_t& cycle_length, const TransitionModel& model, const RewardTable& rewards, double gamma,
             std::size_t max_iter, Improve&& improve) {
  values = policy_evaluation(pi, model, rewards, gamma);
  std::vector<std::size_t> actions(model.num_states());
  std::vector<std::vector<std::size_t>> seen;
  std::vector<ValueFunction> seen_values;
  auto total = [](const ValueFunction& v) { return std::accumulate(v.begin(), v.end(), 0.0); };
  for (iterations = 0; iterations < max_iter;) {
    improve(values, actions);
    ++iterations;
    const auto hit = std::find(seen.begin(), seen.end(), actions);
    if (!seen.empty() && hit == seen.end() - 1) {
      converged = true;
      return;
    }
    if (hit != seen.end()) {
      const auto first = static_cast<std::size_t>(hit - seen.begin());
      cycle_length = seen.size() - first;
      std::size_t best = first;
      for (std::size_t i = first + 1; i < seen.size(); ++i) {
        if (total(seen_values[i]) > total(seen_values[best])) best = i;
      }
      pi = StochasticPolicy::deterministic(seen[best], model.num_actions(), pi.domain());
      values = std::move(seen_values[best]);
      return;
    }
    pi = StochasticPolicy::deterministic(actions, model.num_actions(), pi.domain());
    values = policy_evaluation(pi, model, rewards, gamma, kDefaultEvalTolerance, values);
    seen.push_back(actions);
    seen_values.push_back(values);
  }
}

}  // namespace

double action_value(const TransitionModel& model, const RewardTable& rewards, double gamma,
                    std::span<const double> values, std::size_t state, std::size_t action) {
  const double r = rewards.at(state, action);
  if (rewards.is_terminal(state, action)) return r;
  if (!model.supported(state, action)) return rewards.penalty;
  const SparseRow& row = model.row(state, action);
  double ev = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i) ev += row.prob[i] * values[row.next[i]];
  return r + gamma * ev;
}

std::size_t tolerant_argmax(std::span<const double> values) {
  double best = kNegInf;
  for (double v : values) best = std::max(best, v);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] >= best - kTieTolerance) return i;
  }
  return 0;
}

ValueFunction policy_evaluation(const StochasticPolicy& policy, const TransitionModel& model,
                                const RewardTable& rewards, double gamma, double tol,
                                std::span<const double> warm_start) {
  check_gamma(gamma);
  check_shapes(model, rewards);
  check_policy_shape(policy, model);
  model.check_stochastic(1e-9);
  if (!(tol > 0.0)) throw Error(ErrorCode::invalid_argument, "evaluation tolerance must be positive");

  const std::size_t n = model.num_states();
  ValueFunction v(n, 0.0);
  if (warm_start.size() == n) std::copy(warm_start.begin(), warm_start.end(), v.begin());
  const SparsePolicy sp(policy);

  // Gauss-Seidel sweeps until the sweep change is small, then confirm with a
  // full Bellman residual. The sweep bound is tighter than the residual, so
  // the confirmation rarely fails.
  const double sweep_tol = tol * (1.0 - gamma) * 0.5;
  for (std::size_t sweep = 0;; ++sweep) {
    double delta = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      const double nv = solve_state(sp, model, rewards, gamma, v, s);
      delta = std::max(delta, std::abs(nv - v[s]));
      v[s] = nv;
    }
    if (delta <= sweep_tol || gamma == 0.0) {
      if (bellman_residual(policy, model, rewards, gamma, v) <= tol) break;
    }
    if (sweep > 10'000'000) throw Error(ErrorCode::invalid_model, "policy evaluation failed to converge");
  }
  return v;
}

double bellman_residual(const StochasticPolicy& policy, const TransitionModel& model, const RewardTable& rewards,
                        double gamma, std::span<const double> values) {
  const SparsePolicy sp(policy);
  double r = 0.0;
  for (std::size_t s = 0; s < model.num_states(); ++s) {
    r = std::max(r, std::abs(backup(sp, model, rewards, gamma, values, s) - values[s]));
  }
  return r;
}

PolicyIterationResult policy_iteration(const TransitionModel& model, const RewardTable& rewards, double gamma,
                                       std::size_t max_iter, PolicyDomain domain) {
  check_gamma(gamma);
  check_shapes(model, rewards);
  PolicyIterationResult out;
  out.policy = StochasticPolicy::uniform(model.num_states(), model.num_actions(), domain);
  std::vector<double> q(model.num_actions());
  iterate(out.policy, out.values, out.iterations, out.converged, out.cycle_length, model, rewards, gamma, max_iter,
          [&](const ValueFunction& v, std::vector<std::size_t>& actions) {
            for (std::size_t s = 0; s < model.num_states(); ++s) {
              for (std::size_t a = 0; a < q.size(); ++a) q[a] = action_value(model, rewards, gamma, v, s, a);
              actions[s] = tolerant_argmax(q);
            }
          });
  return out;
}

StochasticPolicy make_behavior_policy(const StochasticPolicy& optimal, double epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw Error(ErrorCode::invalid_argument, "epsilon must lie in [0,1]");
  }
  StochasticPolicy out = optimal;
  const double floor = epsilon / static_cast<double>(optimal.num_actions());
  std::vector<double> row(optimal.num_actions());
  for (std::size_t r = 0; r < optimal.num_rows(); ++r) {
    double total = 0.0;
    for (std::size_t a = 0; a < row.size(); ++a) {
      row[a] = (1.0 - epsilon) * optimal.prob(r, a) + floor;
      total += row[a];
    }
    for (double& p : row) p /= total;
    out.set_row(r, row);
  }
  return out;
}

std::vector<double> proposal_distribution(std::span<const double> values, const TransitionModel& model,
                                          const RewardTable& rewards, double gamma, std::size_t state) {
  const std::size_t na = model.num_actions();
  std::vector<double> nu(na, 0.0);
  double lo = std::numeric_limits<double>::infinity();
  std::size_t n_avail = 0;
  for (std::size_t a = 0; a < na; ++a) {
    if (!available(model, rewards, state, a)) continue;
    nu[a] = action_value(model, rewards, gamma, values, state, a);
    lo = std::min(lo, nu[a]);
    ++n_avail;
  }
  if (n_avail == 0) {
    throw Error(ErrorCode::empty_support, "no available action at state " + std::to_string(state));
  }
  double z = 0.0;
  for (std::size_t a = 0; a < na; ++a) {
    if (!available(model, rewards, state, a)) continue;
    nu[a] -= lo;
    z += nu[a];
  }
  for (std::size_t a = 0; a < na; ++a) {
    if (!available(model, rewards, state, a)) continue;
    nu[a] = z > 0.0 ? nu[a] / z : 1.0 / static_cast<double>(n_avail);
  }
  return nu;
}

std::vector<double> kl_aggregate(std::span<const double> nu, std::span<const double> source, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error(ErrorCode::invalid_argument, "lambda must lie in [0,1]");
  if (nu.size() != source.size()) throw Error(ErrorCode::invalid_argument, "distribution sizes differ");
  if (lambda == 1.0) return {nu.begin(), nu.end()};
  if (lambda == 0.0) return {source.begin(), source.end()};

  std::vector<double> logp(nu.size(), kNegInf);
  double hi = kNegInf;
  for (std::size_t a = 0; a < nu.size(); ++a) {
    if (nu[a] > 0.0 && source[a] > 0.0) {
      logp[a] = lambda * std::log(nu[a]) + (1.0 - lambda) * std::log(source[a]);
      hi = std::max(hi, logp[a]);
    }
  }
  if (hi == kNegInf) throw Error(ErrorCode::no_feasible_policy, "proposal and source supports do not overlap");
  double z = 0.0;
  for (double& l : logp) {
    l = l == kNegInf ? 0.0 : std::exp(l - hi);
    z += l;
  }
  for (double& p : logp) p /= z;
  return logp;
}

double kl_objective(std::span<const double> pi, std::span<const double> nu, std::span<const double> source,
                    double lambda) {
  auto kl = [&](std::span<const double> ref) {
    double d = 0.0;
    for (std::size_t a = 0; a < pi.size(); ++a) {
      if (pi[a] <= 0.0) continue;
      if (ref[a] <= 0.0) return std::numeric_limits<double>::infinity();
      d += pi[a] * std::log(pi[a] / ref[a]);
    }
    return d;
  };
  double total = 0.0;
  if (lambda > 0.0) total += lambda * kl(nu);
  if (lambda < 1.0) total += (1.0 - lambda) * kl(source);
  return total;
}

RegPiResult reg_pi(const StochasticPolicy& initial, double gamma, const TransitionModel& model,
                   const RewardTable& rewards, const StochasticPolicy& source, double lambda,
                   std::size_t max_iter) {
  check_gamma(gamma);
  check_shapes(model, rewards);
  check_policy_shape(initial, model);
  check_policy_shape(source, model);
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error(ErrorCode::invalid_argument, "lambda must lie in [0,1]");

  const std::size_t ns = model.num_states();
  const std::size_t na = model.num_actions();
  RegPiResult out;
  out.policy = initial;
  out.aggregated = StochasticPolicy::uniform(ns, na, initial.domain());
  std::vector<double> q(na);
  const std::vector<double> uniform(na, 1.0 / static_cast<double>(na));

  iterate(out.policy, out.values, out.iterations, out.converged, out.cycle_length, model, rewards, gamma, max_iter,
          [&](const ValueFunction& v, std::vector<std::size_t>& actions) {
            for (std::size_t s = 0; s < ns; ++s) {
              bool any = false;
              for (std::size_t a = 0; a < na && !any; ++a) any = available(model, rewards, s, a);
              // States with nothing available keep a flat proposal; only the
              // source policy then shapes the choice.
              const std::vector<double> nu = any ? proposal_distribution(v, model, rewards, gamma, s) : uniform;
              const std::vector<double> agg = kl_aggregate(nu, source.row(s), lambda);
              out.aggregated.set_row(s, agg);
              if (lambda == 1.0) {
                for (std::size_t a = 0; a < na; ++a) q[a] = action_value(model, rewards, gamma, v, s, a);
                actions[s] = tolerant_argmax(q);
              } else if (lambda == 0.0) {
                actions[s] = source.greedy(s);
              } else {
                actions[s] = tolerant_argmax(agg);
              }
            }
          });
  return out;
}

}  // namespace cfpt::policy
