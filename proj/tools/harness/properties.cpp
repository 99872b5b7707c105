#include "properties.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "cfpt/model.hpp"
#include "cfpt/policy/tabular.hpp"
#include "cfpt/random.hpp"
#include "cfpt/scm/gumbel.hpp"

namespace cfpt::harness {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Random distribution of size d; each entry is zeroed with probability
// `zero_p`, keeping at least one positive entry.
std::vector<double> random_dist(std::size_t d, double zero_p, Rng& rng) {
  std::vector<double> p(d);
  double total = 0.0;
  while (total == 0.0) {
    total = 0.0;
    for (auto& x : p) {
      x = uniform_open(rng) < zero_p ? 0.0 : standard_exponential(rng);
      total += x;
    }
  }
  for (auto& x : p) x /= total;
  return p;
}

std::size_t uniform_index(std::size_t n, Rng& rng) {
  return std::min(n - 1, static_cast<std::size_t>(uniform_open(rng) * static_cast<double>(n)));
}

// Independent of the library's own check: j is excluded when
// p'_k / p_k >= p'_j / p_j, compared without division.
bool excluded(const std::vector<double>& p, const std::vector<double>& p_prime, std::size_t k, std::size_t j) {
  return p_prime[k] * p[j] >= p_prime[j] * p[k];
}

// lambda KL(pi||nu) + (1-lambda) KL(pi||source), with 0 log 0 = 0 and zero
// weights dropping their term.
double objective(const std::vector<double>& pi, const std::vector<double>& nu, const std::vector<double>& src,
                 double lambda) {
  double f = 0.0;
  for (std::size_t a = 0; a < pi.size(); ++a) {
    if (pi[a] <= 0.0) continue;
    if (lambda > 0.0) {
      if (nu[a] <= 0.0) return std::numeric_limits<double>::infinity();
      f += lambda * pi[a] * std::log(pi[a] / nu[a]);
    }
    if (lambda < 1.0) {
      if (src[a] <= 0.0) return std::numeric_limits<double>::infinity();
      f += (1.0 - lambda) * pi[a] * std::log(pi[a] / src[a]);
    }
  }
  return f;
}

std::size_t grid_count(std::size_t d, std::size_t m) {
  // C(m + d - 1, d - 1)
  double c = 1.0;
  for (std::size_t i = 1; i < d; ++i) c = c * static_cast<double>(m + i) / static_cast<double>(i);
  return static_cast<std::size_t>(std::llround(c));
}

template <typename F>
void for_each_composition(std::size_t d, std::size_t m, std::vector<std::size_t>& parts, std::size_t pos,
                          std::size_t left, F&& f) {
  if (pos + 1 == d) {
    parts[pos] = left;
    f(parts);
    return;
  }
  for (std::size_t v = 0; v <= left; ++v) {
    parts[pos] = v;
    for_each_composition(d, m, parts, pos + 1, left - v, f);
  }
}

}  // namespace

double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

CheckResult check_stability(std::size_t triples, std::size_t samples, std::span<const double> weights,
                            std::uint64_t seed) {
  const auto t0 = Clock::now();
  Rng rng = make_rng(seed);
  std::size_t violations = 0;
  std::size_t drawn = 0;
  std::size_t fallbacks = 0;
  for (std::size_t t = 0; t < triples; ++t) {
    const std::size_t d = 2 + uniform_index(9, rng);  // K in [2, 10]
    const auto p_source = random_dist(d, 0.2, rng);
    const auto p_target = random_dist(d, 0.2, rng);
    const auto p_prime = random_dist(d, 0.2, rng);
    std::vector<double> both(d);
    for (std::size_t i = 0; i < d; ++i) both[i] = p_source[i] + p_target[i];
    const std::size_t k = sample_discrete(both, rng);

    scm::MixturePrior prior{scm::log_row(p_source), scm::log_row(p_target), 0.0};
    const auto log_hat = scm::log_row(p_prime);
    for (double w : weights) {
      prior.w_target = w;
      const auto draws = scm::mixture_topdown(prior, log_hat, k, samples, rng);
      for (const auto& s : draws) {
        ++drawn;
        if (s.fell_back) ++fallbacks;
        if (s.cf_next_state == k) continue;
        const auto& used = s.target_component ? p_target : p_source;
        if (excluded(used, p_prime, k, s.cf_next_state)) ++violations;
      }
    }
  }
  std::ostringstream msg;
  msg << violations << " violations in " << drawn << " samples (" << triples << " triples x " << weights.size()
      << " weights x " << samples << ", " << fallbacks << " component fallbacks)";
  return {"counterfactual stability", violations == 0, msg.str(), seconds_since(t0)};
}

CheckResult check_topdown(std::size_t samples, double max_ks_location, double max_ks_rejection,
                          std::uint64_t seed) {
  const auto t0 = Clock::now();
  Rng rng = make_rng(seed);
  // Includes a zero-mass category, whose noise should stay unconditioned.
  const std::vector<std::vector<double>> rows{
      {0.5, 0.3, 0.2}, {0.1, 0.25, 0.0, 0.4, 0.25}, {0.6, 0.4}};
  const std::vector<std::size_t> ks{1, 3, 0};
  std::size_t bad_argmax = 0;
  double worst_location = 0.0;
  double worst_rejection = 0.0;
  for (std::size_t c = 0; c < rows.size(); ++c) {
    const auto log_alpha = scm::log_row(rows[c]);
    const std::size_t k = ks[c];
    const std::size_t d = log_alpha.size();
    const double loc = scm::log_sum_exp(log_alpha);

    std::vector<double> maxima;
    std::vector<std::vector<double>> coords(d);
    maxima.reserve(samples);
    std::vector<double> g(d);
    for (std::size_t i = 0; i < samples; ++i) {
      scm::topdown_into(log_alpha, k, rng, g);
      std::size_t best = 0;
      double best_v = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < d; ++j) {
        const double v = log_alpha[j] + g[j];
        if (v > best_v) {
          best_v = v;
          best = j;
        }
        coords[j].push_back(g[j]);
      }
      if (best != k) ++bad_argmax;
      maxima.push_back(log_alpha[k] + g[k]);
    }
    worst_location = std::max(worst_location, ks_statistic(maxima, [loc](double x) {
                                return std::exp(-std::exp(-(x - loc)));
                              }));

    // Oracle: unconditioned Gumbel vectors kept only when k wins.
    std::vector<std::vector<double>> accepted(d);
    std::size_t kept = 0;
    while (kept < samples) {
      std::size_t best = 0;
      double best_v = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < d; ++j) {
        g[j] = standard_gumbel(rng);
        const double v = log_alpha[j] + g[j];
        if (v > best_v) {
          best_v = v;
          best = j;
        }
      }
      if (best != k) continue;
      for (std::size_t j = 0; j < d; ++j) accepted[j].push_back(g[j]);
      ++kept;
    }
    for (std::size_t j = 0; j < d; ++j) {
      worst_rejection = std::max(worst_rejection, ks_two_sample(coords[j], accepted[j]));
    }
  }
  std::ostringstream msg;
  msg << "argmax mismatches " << bad_argmax << ", KS(max vs Gumbel(log sum alpha)) " << worst_location
      << ", worst per-coordinate KS vs rejection " << worst_rejection;
  const bool ok = bad_argmax == 0 && worst_location < max_ks_location && worst_rejection < max_ks_rejection;
  return {"top-down sampling", ok, msg.str(), seconds_since(t0)};
}

CheckResult check_kl_aggregation(std::size_t instances, std::size_t grid_points, double tolerance,
                                 std::uint64_t seed) {
  const auto t0 = Clock::now();
  Rng rng = make_rng(seed);
  std::size_t failures = 0;
  double worst_gap = -std::numeric_limits<double>::infinity();
  std::size_t evaluated = 0;
  for (std::size_t inst = 0; inst < instances; ++inst) {
    const std::size_t d = 2 + inst % 3;
    std::vector<double> nu, src;
    // Supports must overlap for a feasible aggregate.
    do {
      nu = random_dist(d, 0.25, rng);
      src = random_dist(d, 0.25, rng);
    } while ([&] {
      for (std::size_t a = 0; a < d; ++a) {
        if (nu[a] > 0.0 && src[a] > 0.0) return false;
      }
      return true;
    }());
    double lambda = uniform_open(rng);
    if (inst % 10 == 0) lambda = 0.0;
    if (inst % 10 == 1) lambda = 1.0;

    const auto closed = policy::kl_aggregate(nu, src, lambda);
    const double f_closed = objective(closed, nu, src, lambda);

    std::size_t m = 1;
    while (grid_count(d, m) < grid_points) ++m;
    std::vector<std::size_t> parts(d);
    std::vector<double> point(d);
    bool ok = std::isfinite(f_closed);
    for_each_composition(d, m, parts, 0, m, [&](const std::vector<std::size_t>& c) {
      for (std::size_t a = 0; a < d; ++a) point[a] = static_cast<double>(c[a]) / static_cast<double>(m);
      const double f = objective(point, nu, src, lambda);
      ++evaluated;
      if (!std::isfinite(f)) return;
      worst_gap = std::max(worst_gap, f_closed - f);
      if (f_closed > f + tolerance) ok = false;
    });
    if (!ok) ++failures;
  }
  std::ostringstream msg;
  msg << failures << " of " << instances << " instances beaten by a grid point (" << evaluated
      << " grid evaluations, worst closed-minus-grid " << worst_gap << ")";
  return {"KL aggregation optimality", failures == 0, msg.str(), seconds_since(t0)};
}

CheckResult check_policy_iteration(std::size_t instances, std::uint64_t seed) {
  const auto t0 = Clock::now();
  Rng rng = make_rng(seed);
  std::size_t mismatches = 0;
  std::size_t states_checked = 0;
  const double gamma = 0.9;
  for (std::size_t inst = 0; inst < instances; ++inst) {
    const std::size_t ns = 3 + uniform_index(6, rng);
    const std::size_t na = 2 + uniform_index(3, rng);
    TransitionModel model(ns, na);
    RewardTable rewards{ns, na, std::vector<double>(ns * na), std::vector<std::uint8_t>(ns * na, 0), -1.0};
    for (std::size_t s = 0; s < ns; ++s) {
      for (std::size_t a = 0; a < na; ++a) {
        rewards.reward[s * na + a] = 2.0 * uniform_open(rng) - 1.0;
        if (uniform_open(rng) < 0.1) {
          rewards.terminal[s * na + a] = 1;
          continue;
        }
        if (uniform_open(rng) < 0.1) continue;  // unsupported
        const auto p = random_dist(ns, 0.4, rng);
        SparseRow row;
        for (std::size_t j = 0; j < ns; ++j) {
          if (p[j] > 0.0) {
            row.next.push_back(static_cast<std::uint32_t>(j));
            row.prob.push_back(p[j]);
          }
        }
        model.set_row(s, a, row);
      }
    }
    auto q_value = [&](std::size_t s, std::size_t a, const std::vector<double>& v) {
      const double r = rewards.reward[s * na + a];
      if (rewards.terminal[s * na + a]) return r;
      if (!model.supported(s, a)) return rewards.penalty;
      const auto& row = model.row(s, a);
      double ev = 0.0;
      for (std::size_t i = 0; i < row.size(); ++i) ev += row.prob[i] * v[row.next[i]];
      return r + gamma * ev;
    };
    // Value iteration to a fixed point well below the tie tolerance.
    std::vector<double> v(ns, 0.0), next(ns), q(na);
    for (int it = 0; it < 100000; ++it) {
      double delta = 0.0;
      for (std::size_t s = 0; s < ns; ++s) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < na; ++a) best = std::max(best, q_value(s, a, v));
        next[s] = best;
        delta = std::max(delta, std::abs(best - v[s]));
      }
      v.swap(next);
      if (delta < 1e-14) break;
    }
    const auto pi = policy::policy_iteration(model, rewards, gamma);
    for (std::size_t s = 0; s < ns; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < na; ++a) {
        q[a] = q_value(s, a, v);
        best = std::max(best, q[a]);
      }
      std::size_t vi_action = 0;
      while (q[vi_action] < best - policy::kTieTolerance) ++vi_action;
      ++states_checked;
      if (pi.policy.greedy(s) != vi_action) ++mismatches;
    }
  }
  std::ostringstream msg;
  msg << mismatches << " greedy mismatches over " << states_checked << " states in " << instances << " MDPs";
  return {"policy iteration vs value iteration", mismatches == 0, msg.str(), seconds_since(t0)};
}

}  // namespace cfpt::harness
