#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cfpt/eval/evaluate.hpp"
#include "cfpt/policy/stochastic_policy.hpp"
#include "cfpt/sim/simulator.hpp"
#include "cfpt/transfer/cfpt.hpp"
#include "experiment_spec.hpp"

namespace cfpt::harness {

/// Ground truth shared by every run on the same dynamics. Immutable.
struct Environment {
  sim::SepsisSimulator simulator;
  policy::StochasticPolicy optimal;    // full-state optimum of the true MDP
  policy::StochasticPolicy behavior;   // optimal softened by epsilon
  std::uint64_t fingerprint = 0;
};

std::shared_ptr<const Environment> make_environment(const ExperimentSpec& spec);

/// FNV-1a over every supported row of the model.
std::uint64_t model_fingerprint(const TransitionModel& model);

/// Seed streams derived from one master seed. Red. CFPT draws from the CFPT
/// stream so the two differ only in the mixture weight.
struct SeedPlan {
  std::uint64_t source = 0;
  std::uint64_t target = 0;
  std::uint64_t eval = 0;
  std::uint64_t cf_pe = 0;

  explicit SeedPlan(std::uint64_t master);
  static std::uint64_t method(std::uint64_t master, transfer::Method m);
};

struct Datasets {
  sim::Dataset source;
  sim::Dataset target;
};

Datasets generate_datasets(const Environment& env, const ExperimentSpec& spec, std::uint64_t seed);

/// Coordinates of one sweep grid point; a plain run is a single point.
struct GridPoint {
  double p_diab = 0.0;
  std::size_t target_size = 0;
  double eta = 0.0;
  double lambda = 0.0;
  std::string label;
};

GridPoint base_point(const ExperimentSpec& spec);
/// Axis names: p_diab, target_size, eta_lambda.
std::vector<GridPoint> sweep_grid(const ExperimentSpec& spec, const std::string& axis);
ExperimentSpec apply_point(ExperimentSpec spec, const GridPoint& point);

struct MethodResult {
  transfer::Method method = transfer::Method::random;
  std::uint64_t seed = 0;
  GridPoint point;
  eval::EvalReport truth;
  std::optional<double> wis;
  std::optional<eval::EvalReport> cf_pe;
  std::size_t cf_pe_unchanged = 0;
  double train_seconds = 0.0;   // informational; never written to result files
  policy::StochasticPolicy policy;
  std::optional<double> improvement_over_scratch;
};

using Logger = std::function<void(const std::string&)>;

/// Trains and evaluates every method of `spec` for one master seed. Missing
/// inputs are reported as Error(configuration) before any training. When
/// `data` is given it replaces generation. When `run_dir` is nonempty,
/// policies, reports and a manifest are written there.
std::vector<MethodResult> run_one(const Environment& env, const ExperimentSpec& spec, std::uint64_t seed,
                                  const GridPoint& point, const std::string& run_dir, const Datasets* data = nullptr,
                                  const Logger& log = {});

/// Fills improvement_over_scratch for rows sharing (point, seed) with a Scratch row.
void attach_improvement(std::vector<MethodResult>& rows);

std::string results_csv_header();
std::string results_csv_row(const MethodResult& r);
void write_results_csv(const std::string& path, const std::vector<MethodResult>& rows);

std::string method_report_json(const MethodResult& r);

/// Manifest with the resolved spec, code version, seeds and model fingerprint.
std::string manifest_json(const ExperimentSpec& spec, const Environment& env, std::uint64_t seed,
                          const std::string& kind);

/// Root for outputs: spec.output_dir, else $CFPT_OUTPUT_ROOT, else "runs".
std::string default_output_root(const ExperimentSpec& spec);

const char* code_version();

/// Runs `jobs` in a pool of `workers` threads; exceptions propagate after all finish.
void run_pool(std::vector<std::function<void()>> jobs, std::size_t workers);

}  // namespace cfpt::harness
