// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero when any criterion fails.
//
// Usage: cfpt_acceptance [num_seeds] [--known-fail=6,7,...]
// Criteria listed in --known-fail still run and still print FAIL; they only
// stop counting against the exit code. A listed criterion that passes is
// reported so the list can be trimmed.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cfpt/eval/evaluate.hpp"
#include "cfpt/random.hpp"
#include "cfpt/transfer/cfpt.hpp"
#include "cfpt/transfer/estimate.hpp"
#include "harness/properties.hpp"
#include "harness/runner.hpp"

using namespace cfpt;
using namespace cfpt::harness;
using transfer::Method;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

struct Line {
  int id;
  bool passed;
  std::string detail;
};

std::vector<Line> lines;

void report(int id, bool passed, const std::string& detail) {
  lines.push_back({id, passed, detail});
  std::printf("criterion %d: %s  %s\n", id, passed ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
}

const std::vector<Method> kLearned{Method::scratch, Method::pooled, Method::blind, Method::regpi,
                                   Method::red_cfpt, Method::cfpt, Method::bc, Method::full_obs};

// Everything one master seed contributes to criteria 4 to 9.
struct SeedRun {
  std::uint64_t seed = 0;
  std::map<Method, MethodResult> at_default;
  std::map<Method, MethodResult> at_10000;
  bool lambda1_matches_scratch = false;
  bool lambda0_matches_blind = false;
  bool red_matches_w1 = false;
  bool cfpt_matches_harness = false;
  std::size_t replay_unchanged = 0;
  std::size_t replay_total = 0;
  double cf_mu_mean = 0.0;
  eval::EvalReport observed;
  double cf_mu_estimated_mean = 0.0;
  bool coverage = false;
  std::string coverage_detail;
  double seconds = 0.0;
};

SeedRun run_seed(const Environment& env, const ExperimentSpec& spec, std::uint64_t seed) {
  const auto t0 = Clock::now();
  SeedRun out;
  out.seed = seed;
  const Datasets data = generate_datasets(env, spec, seed);

  ExperimentSpec main = spec;
  main.methods = kLearned;
  main.eval.cf_pe = false;  // criterion 5 runs its own CF-PE below
  for (auto& r : run_one(env, main, seed, base_point(main), "", &data)) out.at_default.emplace(r.method, r);

  // Criterion 4: reductions, all on the CFPT seed stream.
  const auto source_model = transfer::estimate_transitions(data.source);
  const auto source_policy = transfer::make_source_policy(source_model, spec.cfpt);
  const auto pi0 = policy::StochasticPolicy::uniform(sim::kNumObservations, sim::kNumActions);
  const std::uint64_t cf_seed = SeedPlan::method(seed, Method::cfpt);
  auto cf = [&](double lambda, double eta, double w) {
    transfer::CfptConfig c = spec.cfpt;
    c.lambda = lambda;
    c.eta = eta;
    c.w_target = w;
    return transfer::cf_pi(pi0, source_policy, source_model, data.target, c, cf_seed);
  };
  out.lambda1_matches_scratch = cf(1.0, 1.0, 1.0).policy == out.at_default.at(Method::scratch).policy;
  out.lambda0_matches_blind =
      cf(0.0, spec.cfpt.eta, spec.cfpt.w_target).policy.greedy_actions() == source_policy.greedy_actions();
  out.red_matches_w1 = cf(spec.cfpt.lambda, spec.cfpt.eta, 1.0).policy == out.at_default.at(Method::red_cfpt).policy;
  const auto full = cf(spec.cfpt.lambda, spec.cfpt.eta, spec.cfpt.w_target);
  out.cfpt_matches_harness = full.policy == out.at_default.at(Method::cfpt).policy;

  // Criterion 5: abduction consistency on the target data.
  const SeedPlan plan(seed);
  const auto target_model = transfer::estimate_transitions(data.target);
  eval::CfPeOptions replay;
  replay.replay_observed_actions = true;
  const auto forced = eval::cf_pe(data.target, env.behavior, target_model.transitions, nullptr, replay, plan.cf_pe);
  out.replay_unchanged = forced.unchanged;
  out.replay_total = data.target.size();
  const auto free_true = eval::cf_pe(data.target, env.behavior, env.simulator.true_model(), nullptr, {}, plan.cf_pe);
  out.cf_mu_mean = free_true.summary.mean_return;
  const auto free_est = eval::cf_pe(data.target, env.behavior, target_model.transitions, nullptr, {}, plan.cf_pe);
  out.cf_mu_estimated_mean = free_est.summary.mean_return;
  out.observed = eval::summarize(data.target, spec.eval.bootstrap, plan.eval);

  // Criterion 9: the final CF-PI batch against the observed target batch.
  const auto h_cf = eval::visitation_histogram(full.last_batch);
  const auto h_obs = eval::visitation_histogram(data.target);
  out.coverage = eval::support_contains(h_cf, h_obs);
  for (std::size_t f = 0; f < h_obs.size(); ++f) {
    for (std::size_t i = 0; i < h_obs[f].counts.size(); ++i) {
      if (h_obs[f].counts[i] > 0 && h_cf[f].counts[i] == 0) {
        out.coverage_detail += " " + h_obs[f].feature + "[" + std::to_string(i) + "]";
      }
    }
  }

  // Criterion 7: the same seed with a 10000-trajectory target.
  ExperimentSpec big = spec;
  big.methods = {Method::scratch, Method::cfpt};
  big.eval.wis = false;
  big.eval.cf_pe = false;
  GridPoint point = base_point(big);
  point.target_size = 10000;
  point.label = "target_size=10000";
  for (auto& r : run_one(env, apply_point(big, point), seed, point, "")) out.at_10000.emplace(r.method, r);

  out.seconds = since(t0);
  return out;
}

double mean_of(const std::vector<SeedRun>& runs, Method m, bool big = false) {
  double s = 0.0;
  for (const auto& r : runs) s += (big ? r.at_10000 : r.at_default).at(m).truth.mean_return;
  return s / static_cast<double>(runs.size());
}

}  // namespace

int main(int argc, char** argv) {
  std::size_t num_seeds = 5;
  std::set<int> known_fail;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    const std::string flag = "--known-fail=";
    if (arg.rfind(flag, 0) == 0) {
      std::stringstream list(arg.substr(flag.size()));
      for (std::string id; std::getline(list, id, ',');) known_fail.insert(std::stoi(id));
    } else {
      num_seeds = std::strtoul(arg.c_str(), nullptr, 10);
    }
  }
  const std::uint64_t property_seed = 20240601;

  {
    const auto t0 = Clock::now();
    const double weights[] = {0.0, 0.5, 0.8, 1.0};
    const auto r = check_stability(1000, 10000, weights, property_seed);
    const double s = since(t0);
    report(1, r.passed && s < 120.0, r.detail + fmt(" (%.1fs)", s));
  }
  {
    const auto t0 = Clock::now();
    const auto r = check_topdown(100000, 0.01, 0.02, property_seed + 1);
    const double s = since(t0);
    report(2, r.passed && s < 60.0, r.detail + fmt(" (%.1fs)", s));
  }
  {
    const auto t0 = Clock::now();
    const auto r = check_kl_aggregation(100, 1000, 1e-8, property_seed + 2);
    const double s = since(t0);
    report(3, r.passed && s < 30.0, r.detail + fmt(" (%.1fs)", s));
  }

  // Criteria 4 to 9 share one run per seed at the default configuration.
  const ExperimentSpec spec;
  const auto t_env = Clock::now();
  const auto env = make_environment(spec);
  std::printf("environment ready (%.1fs), running %zu seeds\n", since(t_env), num_seeds);
  std::fflush(stdout);

  std::vector<SeedRun> runs(num_seeds);
  std::mutex print;
  std::vector<std::function<void()>> jobs;
  for (std::size_t i = 0; i < num_seeds; ++i) {
    jobs.push_back([&, i] {
      runs[i] = run_seed(*env, spec, i + 1);
      const std::lock_guard<std::mutex> lock(print);
      std::printf("  seed %zu (%.0fs):", i + 1, runs[i].seconds);
      for (Method m : kLearned) {
        const auto& r = runs[i].at_default.at(m);
        std::printf(" %s %.3f[%.3f,%.3f]", transfer::to_string(m), r.truth.mean_return, r.truth.ci_low,
                    r.truth.ci_high);
      }
      std::printf("\n");
      std::fflush(stdout);
    });
  }
  const auto t_runs = Clock::now();
  run_pool(std::move(jobs), std::max(1u, std::thread::hardware_concurrency()));
  const double run_seconds = since(t_runs);

  {
    bool ok = true;
    std::string bad;
    for (const auto& r : runs) {
      const bool seed_ok =
          r.lambda1_matches_scratch && r.lambda0_matches_blind && r.red_matches_w1 && r.cfpt_matches_harness;
      ok = ok && seed_ok;
      if (!seed_ok) {
        bad += " seed " + std::to_string(r.seed) + ":" + (r.lambda1_matches_scratch ? "" : " lambda1!=scratch") +
               (r.lambda0_matches_blind ? "" : " lambda0!=blind") + (r.red_matches_w1 ? "" : " red!=w1") +
               (r.cfpt_matches_harness ? "" : " cfpt!=harness");
      }
    }
    report(4, ok, ok ? "exact policy equality on every seed" : "mismatch:" + bad);
  }
  {
    bool ok = true;
    std::string detail;
    for (const auto& r : runs) {
      const bool replay_ok = r.replay_unchanged == r.replay_total;
      const bool mean_ok = r.cf_mu_mean >= r.observed.ci_low && r.cf_mu_mean <= r.observed.ci_high;
      ok = ok && replay_ok && mean_ok;
      char buf[200];
      std::snprintf(buf, sizeof buf, " [seed %llu replay %zu/%zu, CF %.3f in [%.3f,%.3f], estimated-model CF %.3f]",
                    static_cast<unsigned long long>(r.seed), r.replay_unchanged, r.replay_total, r.cf_mu_mean,
                    r.observed.ci_low, r.observed.ci_high, r.cf_mu_estimated_mean);
      detail += buf;
    }
    report(5, ok, detail);
  }
  {
    const double scratch = mean_of(runs, Method::scratch);
    const double pooled = mean_of(runs, Method::pooled);
    const double blind = mean_of(runs, Method::blind);
    const double regpi = mean_of(runs, Method::regpi);
    const double red = mean_of(runs, Method::red_cfpt);
    const double cfpt = mean_of(runs, Method::cfpt);
    const bool order = scratch < std::max(pooled, blind) && std::max(pooled, blind) < regpi && regpi < red &&
                       red < cfpt;
    bool disjoint = true;
    for (const auto& r : runs) {
      disjoint = disjoint && r.at_default.at(Method::scratch).truth.ci_high < r.at_default.at(Method::cfpt).truth.ci_low;
    }
    const bool gap = cfpt - scratch >= 0.3;
    char buf[400];
    std::snprintf(buf, sizeof buf,
                  "means scratch %.3f pooled %.3f blind %.3f regpi %.3f red_cfpt %.3f cfpt %.3f; ordering %s, "
                  "scratch/cfpt CIs disjoint on every seed %s, gap %.3f (>= 0.3 %s); %.0fs for %zu seeds",
                  scratch, pooled, blind, regpi, red, cfpt, order ? "yes" : "no", disjoint ? "yes" : "no",
                  cfpt - scratch, gap ? "yes" : "no", run_seconds, num_seeds);
    report(6, order && disjoint && gap, buf);
  }
  {
    const double small = mean_of(runs, Method::cfpt) - mean_of(runs, Method::scratch);
    const double large = mean_of(runs, Method::cfpt, true) - mean_of(runs, Method::scratch, true);
    char buf[200];
    std::snprintf(buf, sizeof buf, "improvement over scratch: %.3f at |H_T|=2000, %.3f at |H_T|=10000", small, large);
    report(7, small > large, buf);
  }
  {
    bool ok = true;
    std::string detail;
    for (Method m : kLearned) {
      double w = 0.0, t = 0.0;
      std::size_t defined = 0;
      for (const auto& r : runs) {
        const auto& res = r.at_default.at(m);
        t += res.truth.mean_return;
        if (res.wis) {
          w += *res.wis;
          ++defined;
        }
      }
      t /= static_cast<double>(runs.size());
      const bool m_ok = defined == runs.size() && w / static_cast<double>(defined) >= t;
      ok = ok && m_ok;
      char buf[120];
      std::snprintf(buf, sizeof buf, " %s wis %.3f true %.3f%s%s;", transfer::to_string(m),
                    defined ? w / static_cast<double>(defined) : NAN, t,
                    defined == runs.size() ? "" : " (WIS undefined on some seeds)", m_ok ? "" : " <-");
      detail += buf;
    }
    report(8, ok, detail);
  }
  {
    bool ok = true;
    std::string detail;
    for (const auto& r : runs) {
      ok = ok && r.coverage;
      if (!r.coverage) detail += " seed " + std::to_string(r.seed) + " misses" + r.coverage_detail + ";";
    }
    report(9, ok, ok ? "counterfactual support contains observed support on every seed" : detail);
  }

  std::size_t passed = 0;
  bool blocking = false;
  for (const auto& l : lines) {
    passed += l.passed;
    if (!l.passed && !known_fail.count(l.id)) blocking = true;
    if (l.passed && known_fail.count(l.id)) std::printf("criterion %d is listed as a known failure but passed\n", l.id);
  }
  std::printf("%zu/%zu criteria passed\n", passed, lines.size());
  if (!known_fail.empty() && passed < lines.size() && !blocking) {
    std::printf("every failing criterion is on the known-failure list\n");
  }
  return blocking ? EXIT_FAILURE : EXIT_SUCCESS;
}
