#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "cfpt/random.hpp"

namespace cfpt::scm {

/// Exogenous noise for one categorical draw: outcome = argmax(log alpha + values).
struct GumbelVector {
  std::vector<double> values;
  std::optional<std::size_t> observed;
};

/// Row of log-probabilities from a probability row; zeros map to -infinity.
std::vector<double> log_row(std::span<const double> probs);

/// log sum exp, -infinity for an all -infinity row.
double log_sum_exp(std::span<const double> log_alpha);

/// argmax with the lowest index winning ties.
std::size_t argmax_index(std::span<const double> values);

/// argmax(log_alpha + g) for fresh standard Gumbel g.
/// Throws Error(invalid_distribution) when no entry is finite.
std::size_t gumbel_max_sample(std::span<const double> log_alpha, Rng& rng);

/// Gumbel noise conditioned on argmax(log_alpha + g) == k. The winning
/// coordinate's perturbed value is Gumbel(location log sum alpha); the others
/// are truncated below it. Zero-mass categories receive unconditioned noise.
/// Throws Error(impossible_observation) when alpha_k == 0.
GumbelVector topdown(std::span<const double> log_alpha, std::size_t k, Rng& rng);

/// Allocation-free form of topdown writing into `out` (same size as log_alpha).
void topdown_into(std::span<const double> log_alpha, std::size_t k, Rng& rng, std::span<double> out);

/// Prior over the observed transition's mechanism: target row with probability
/// w_target, else the source row.
struct MixturePrior {
  std::vector<double> log_alpha_source;
  std::vector<double> log_alpha_target;
  double w_target = 1.0;
};

struct CounterfactualSample {
  std::size_t cf_next_state = 0;
  GumbelVector gumbel;
  // Component whose row was conditioned on: true = target. Differs from the
  // Bernoulli draw only when that draw had zero mass on k and we fell back.
  bool target_component = true;
  bool fell_back = false;
};

/// Draws n samples: pick a component, abduct noise from its row given k,
/// apply the noise to log_alpha_hat. Falls back to the other component when
/// the chosen one has no mass on k.
/// Throws Error(impossible_observation) when neither component has mass on k.
std::vector<CounterfactualSample> mixture_topdown(const MixturePrior& prior, std::span<const double> log_alpha_hat,
                                                  std::size_t k, std::size_t n, Rng& rng);

/// Counts counterfactual outcomes j != k for which p'_k / p_k >= p'_j / p_j,
/// i.e. outcomes the stability property rules out. Noise is abducted from p
/// given k and applied to p_prime.
std::size_t check_counterfactual_stability(std::span<const double> p, std::span<const double> p_prime,
                                           std::size_t k, std::size_t samples, Rng& rng);

/// Same count through mixture_topdown; each violation is judged against the
/// row that was actually conditioned on.
std::size_t check_mixture_stability(std::span<const double> p_source, std::span<const double> p_target,
                                    double w_target, std::span<const double> p_prime, std::size_t k,
                                    std::size_t samples, Rng& rng);

/// True when outcome j is excluded by stability for the pair (p, p') given k.
bool stability_forbids(std::span<const double> p, std::span<const double> p_prime, std::size_t k, std::size_t j);

}  // namespace cfpt::scm
