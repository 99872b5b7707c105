#include <benchmark/benchmark.h>

#include <vector>

#include "cfpt/eval/evaluate.hpp"
#include "cfpt/policy/tabular.hpp"
#include "cfpt/random.hpp"
#include "cfpt/scm/gumbel.hpp"
#include "cfpt/scm/rollout.hpp"
#include "cfpt/sim/simulator.hpp"
#include "cfpt/transfer/cfpt.hpp"
#include "cfpt/transfer/estimate.hpp"

using namespace cfpt;

namespace {

std::vector<double> random_log_row(std::size_t k, Rng& rng) {
  std::vector<double> p(k);
  double z = 0.0;
  for (double& x : p) z += (x = uniform_open(rng));
  for (double& x : p) x /= z;
  return scm::log_row(p);
}

// Shared fixture: simulator, behavior policy and a default-size target set.
struct World {
  sim::SepsisSimulator simulator;
  policy::StochasticPolicy behavior;
  sim::Dataset source, target;
  transfer::EstimatedModel source_model, target_model;

  World() {
    const auto opt = policy::policy_iteration(simulator.true_model(), simulator.state_rewards(), 0.99, 1000,
                                              policy::PolicyDomain::full_state);
    behavior = policy::make_behavior_policy(opt.policy, 0.15);
    source = sim::generate_dataset(simulator, behavior, 10000, 0.1, 20, 1);
    target = sim::generate_dataset(simulator, behavior, 2000, 0.8, 20, 2);
    source_model = transfer::estimate_transitions(source);
    target_model = transfer::estimate_transitions(target);
  }
};

const World& world() {
  static const World w;
  return w;
}

}  // namespace

static void BM_GumbelMax(benchmark::State& state) {
  Rng rng = make_rng(1);
  const auto log_alpha = random_log_row(static_cast<std::size_t>(state.range(0)), rng);
  for (auto _ : state) benchmark::DoNotOptimize(scm::gumbel_max_sample(log_alpha, rng));
}
BENCHMARK(BM_GumbelMax)->Arg(8)->Arg(81);

static void BM_Topdown(benchmark::State& state) {
  Rng rng = make_rng(2);
  const auto log_alpha = random_log_row(static_cast<std::size_t>(state.range(0)), rng);
  std::vector<double> out(log_alpha.size());
  for (auto _ : state) {
    scm::topdown_into(log_alpha, 0, rng, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_Topdown)->Arg(8)->Arg(81);

static void BM_KlAggregate(benchmark::State& state) {
  Rng rng = make_rng(3);
  std::vector<double> nu(sim::kNumActions), src(sim::kNumActions, 1.0 / sim::kNumActions);
  for (double& x : nu) x = uniform_open(rng);
  for (auto _ : state) benchmark::DoNotOptimize(policy::kl_aggregate(nu, src, 0.3));
}
BENCHMARK(BM_KlAggregate);

static void BM_SampleTrajectory(benchmark::State& state) {
  const auto& w = world();
  Rng rng = make_rng(4);
  for (auto _ : state) benchmark::DoNotOptimize(w.simulator.sample_trajectory(w.behavior, true, 20, rng));
}
BENCHMARK(BM_SampleTrajectory);

static void BM_EstimateTransitions(benchmark::State& state) {
  const auto& w = world();
  for (auto _ : state) benchmark::DoNotOptimize(transfer::estimate_transitions(w.target));
}
BENCHMARK(BM_EstimateTransitions)->Unit(benchmark::kMillisecond);

static void BM_CounterfactualRollout(benchmark::State& state) {
  const auto& w = world();
  const auto pi = policy::StochasticPolicy::uniform(sim::kNumObservations, sim::kNumActions);
  const scm::RolloutModels models{&w.source_model.transitions, &w.target_model.transitions,
                                  &w.target_model.transitions, 0.8, -1.0};
  Rng rng = make_rng(5);
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& t = w.target.trajectories[i++ % w.target.size()];
    benchmark::DoNotOptimize(scm::counterfactual_rollout(t, pi, models, {20, false}, rng));
  }
}
BENCHMARK(BM_CounterfactualRollout);

static void BM_PolicyIteration(benchmark::State& state) {
  const auto& w = world();
  const auto rewards = sim::make_reward_table(false);
  for (auto _ : state) {
    benchmark::DoNotOptimize(policy::policy_iteration(w.target_model.transitions, rewards, 0.99));
  }
}
BENCHMARK(BM_PolicyIteration)->Unit(benchmark::kMillisecond);

static void BM_CfPiIteration(benchmark::State& state) {
  const auto& w = world();
  transfer::CfptConfig cfg;
  cfg.iterations = 1;
  const auto source_policy = transfer::make_source_policy(w.source_model, cfg);
  const auto pi0 = policy::StochasticPolicy::uniform(sim::kNumObservations, sim::kNumActions);
  for (auto _ : state) {
    benchmark::DoNotOptimize(transfer::cf_pi(pi0, source_policy, w.source_model, w.target, cfg, 6));
  }
}
BENCHMARK(BM_CfPiIteration)->Unit(benchmark::kMillisecond);

static void BM_TrueReward(benchmark::State& state) {
  const auto& w = world();
  for (auto _ : state) benchmark::DoNotOptimize(eval::true_reward(w.behavior, w.simulator, 1000, 7));
}
BENCHMARK(BM_TrueReward)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
