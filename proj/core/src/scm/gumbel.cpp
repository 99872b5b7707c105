#include "cfpt/scm/gumbel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cfpt/errors.hpp"

namespace cfpt::scm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Gumbel(location phi) truncated to lie below `bound`:
// x = -log(exp(-bound) + exp(-phi)), arranged to avoid overflow.
double truncate_below(double phi, double bound) {
  if (phi > bound) return bound - std::log1p(std::exp(bound - phi));
  return phi - std::log1p(std::exp(phi - bound));
}

void check_rows(std::size_t a, std::size_t b) {
  if (a != b) throw Error(ErrorCode::invalid_argument, "probability rows differ in length");
}

}  // namespace

std::vector<double> log_row(std::span<const double> probs) {
  std::vector<double> out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) out[i] = probs[i] > 0.0 ? std::log(probs[i]) : kNegInf;
  return out;
}

double log_sum_exp(std::span<const double> log_alpha) {
  double hi = kNegInf;
  for (double l : log_alpha) hi = std::max(hi, l);
  if (hi == kNegInf) return kNegInf;
  double s = 0.0;
  for (double l : log_alpha) s += std::exp(l - hi);
  return hi + std::log(s);
}

std::size_t argmax_index(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

std::size_t gumbel_max_sample(std::span<const double> log_alpha, Rng& rng) {
  std::size_t best = 0;
  double best_v = kNegInf;
  bool any = false;
  for (std::size_t i = 0; i < log_alpha.size(); ++i) {
    const double g = standard_gumbel(rng);
    if (log_alpha[i] == kNegInf) continue;
    const double v = log_alpha[i] + g;
    if (!any || v > best_v) {
      best = i;
      best_v = v;
      any = true;
    }
  }
  if (!any) throw Error(ErrorCode::invalid_distribution, "categorical row has no positive mass");
  return best;
}

void topdown_into(std::span<const double> log_alpha, std::size_t k, Rng& rng, std::span<double> out) {
  check_rows(log_alpha.size(), out.size());
  if (k >= log_alpha.size() || log_alpha[k] == kNegInf) {
    throw Error(ErrorCode::impossible_observation,
                "observed outcome " + std::to_string(k) + " has zero probability");
  }
  const double top = log_sum_exp(log_alpha) + standard_gumbel(rng);
  for (std::size_t j = 0; j < log_alpha.size(); ++j) {
    if (j == k) {
      out[j] = top - log_alpha[j];
    } else if (log_alpha[j] == kNegInf) {
      out[j] = standard_gumbel(rng);
    } else {
      const double phi = log_alpha[j] + standard_gumbel(rng);
      out[j] = truncate_below(phi, top) - log_alpha[j];
    }
  }
}

GumbelVector topdown(std::span<const double> log_alpha, std::size_t k, Rng& rng) {
  GumbelVector g;
  g.values.resize(log_alpha.size());
  topdown_into(log_alpha, k, rng, g.values);
  g.observed = k;
  return g;
}

std::vector<CounterfactualSample> mixture_topdown(const MixturePrior& prior, std::span<const double> log_alpha_hat,
                                                  std::size_t k, std::size_t n, Rng& rng) {
  check_rows(prior.log_alpha_source.size(), prior.log_alpha_target.size());
  check_rows(prior.log_alpha_target.size(), log_alpha_hat.size());
  if (!(prior.w_target >= 0.0 && prior.w_target <= 1.0)) {
    throw Error(ErrorCode::invalid_argument, "mixture weight must lie in [0,1]");
  }
  if (k >= log_alpha_hat.size()) throw Error(ErrorCode::invalid_argument, "observed index out of range");
  const bool target_ok = prior.log_alpha_target[k] != kNegInf;
  const bool source_ok = prior.log_alpha_source[k] != kNegInf;
  if (!target_ok && !source_ok) {
    throw Error(ErrorCode::impossible_observation, "neither mixture component explains the observed outcome");
  }

  std::vector<CounterfactualSample> out(n);
  std::vector<double> perturbed(log_alpha_hat.size());
  for (auto& sample : out) {
    const bool drew_target = uniform_open(rng) < prior.w_target;
    bool use_target = drew_target;
    if (use_target && !target_ok) use_target = false;
    if (!use_target && !source_ok) use_target = true;
    sample.target_component = use_target;
    sample.fell_back = use_target != drew_target;
    sample.gumbel = topdown(use_target ? prior.log_alpha_target : prior.log_alpha_source, k, rng);
    for (std::size_t j = 0; j < perturbed.size(); ++j) perturbed[j] = log_alpha_hat[j] + sample.gumbel.values[j];
    sample.cf_next_state = argmax_index(perturbed);
  }
  return out;
}

bool stability_forbids(std::span<const double> p, std::span<const double> p_prime, std::size_t k, std::size_t j) {
  if (j == k) return false;
  // p'_k / p_k >= p'_j / p_j, cross-multiplied to stay finite.
  return p_prime[k] * p[j] >= p_prime[j] * p[k];
}

std::size_t check_counterfactual_stability(std::span<const double> p, std::span<const double> p_prime,
                                           std::size_t k, std::size_t samples, Rng& rng) {
  check_rows(p.size(), p_prime.size());
  const std::vector<double> lp = log_row(p);
  const std::vector<double> lq = log_row(p_prime);
  std::vector<double> g(p.size());
  std::vector<double> perturbed(p.size());
  std::size_t violations = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    topdown_into(lp, k, rng, g);
    for (std::size_t j = 0; j < g.size(); ++j) perturbed[j] = lq[j] + g[j];
    if (stability_forbids(p, p_prime, k, argmax_index(perturbed))) ++violations;
  }
  return violations;
}

std::size_t check_mixture_stability(std::span<const double> p_source, std::span<const double> p_target,
                                    double w_target, std::span<const double> p_prime, std::size_t k,
                                    std::size_t samples, Rng& rng) {
  MixturePrior prior{log_row(p_source), log_row(p_target), w_target};
  const std::vector<double> lq = log_row(p_prime);
  std::size_t violations = 0;
  for (const auto& s : mixture_topdown(prior, lq, k, samples, rng)) {
    const auto& p = s.target_component ? p_target : p_source;
    if (stability_forbids(p, p_prime, k, s.cf_next_state)) ++violations;
  }
  return violations;
}

}  // namespace cfpt::scm
