#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace cfpt::harness {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// Stability of abducted-noise counterfactuals over random (p, p', k) triples,
/// for every mixture weight in `weights`. Violations are judged against the
/// row the noise was conditioned on.
CheckResult check_stability(std::size_t triples, std::size_t samples, std::span<const double> weights,
                            std::uint64_t seed);

/// Top-down sampling: the conditioned argmax always equals k, the maximum is
/// Gumbel(log sum alpha), and each coordinate matches rejection sampling.
CheckResult check_topdown(std::size_t samples, double max_ks_location, double max_ks_rejection,
                          std::uint64_t seed);

/// Closed-form KL aggregation against a brute-force simplex grid of at least
/// `grid_points` points per instance.
CheckResult check_kl_aggregation(std::size_t instances, std::size_t grid_points, double tolerance,
                                 std::uint64_t seed);

/// Policy iteration against value iteration on random small MDPs (greedy actions).
CheckResult check_policy_iteration(std::size_t instances, std::uint64_t seed);

/// Kolmogorov-Smirnov statistic of `sample` against a continuous CDF.
double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf);
/// Two-sample Kolmogorov-Smirnov statistic.
double ks_two_sample(std::vector<double> a, std::vector<double> b);

}  // namespace cfpt::harness
