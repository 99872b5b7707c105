// Experiment runner: dataset generation, single runs, sweeps, re-evaluation
// of saved policies, and the quick property suites.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "cfpt/errors.hpp"
#include "cfpt/eval/evaluate.hpp"
#include "cfpt/policy/policy_csv.hpp"
#include "cfpt/sim/dynamics.hpp"
#include "cfpt/transfer/estimate.hpp"
#include "harness/experiment_spec.hpp"
#include "harness/properties.hpp"
#include "harness/runner.hpp"

namespace fs = std::filesystem;
using namespace cfpt;
using namespace cfpt::harness;

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string methods;
  std::size_t jobs = 1;
  bool quiet = false;
};

std::mutex log_mu;

void log_line(const std::string& msg) {
  std::lock_guard lock(log_mu);
  std::cerr << msg << '\n';
}

ExperimentSpec resolve_spec(const CommonOptions& o) {
  ExperimentSpec spec = o.config.empty() ? ExperimentSpec{} : load_experiment_spec(o.config);
  if (o.seed) spec.seeds = {*o.seed};
  if (!o.methods.empty()) spec.methods = parse_method_list(o.methods);
  spec.validate();
  return spec;
}

fs::path output_dir(const CommonOptions& o, const ExperimentSpec& spec, const std::string& command) {
  return o.out.empty() ? fs::path(default_output_root(spec)) / command : fs::path(o.out);
}

fs::path seed_dir(const fs::path& root, std::uint64_t seed) { return root / ("seed_" + std::to_string(seed)); }

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << text;
}

int cmd_generate(const CommonOptions& o) {
  const auto spec = resolve_spec(o);
  const auto env = make_environment(spec);
  const auto root = output_dir(o, spec, "generate");
  for (auto seed : spec.seeds) {
    const auto dir = seed_dir(root, seed);
    fs::create_directories(dir);
    const auto data = generate_datasets(*env, spec, seed);
    sim::save_dataset((dir / "source.jsonl").string(), data.source);
    sim::save_dataset((dir / "target.jsonl").string(), data.target);
    policy::save_policy_csv((dir / "behavior_policy.csv").string(), env->behavior);
    write_file(dir / "dynamics.yaml", sim::dynamics_config_to_yaml(env->simulator.config()));
    write_file(dir / "manifest.json", manifest_json(spec, *env, seed, "generate"));
    if (!o.quiet) {
      log_line("seed " + std::to_string(seed) + ": " + std::to_string(data.source.size()) + " source, " +
               std::to_string(data.target.size()) + " target trajectories -> " + dir.string());
    }
  }
  return 0;
}

std::optional<Datasets> load_data(const std::string& data_dir, std::uint64_t seed) {
  if (data_dir.empty()) return std::nullopt;
  const auto dir = seed_dir(data_dir, seed);
  return Datasets{sim::load_dataset((dir / "source.jsonl").string()),
                  sim::load_dataset((dir / "target.jsonl").string())};
}

// Runs (point, seed) jobs in a pool and keeps a merged CSV up to date after
// each finished job, in grid order then seed order.
std::vector<MethodResult> run_grid(const CommonOptions& o, const ExperimentSpec& spec,
                                   const std::vector<GridPoint>& grid, const fs::path& root, bool nested,
                                   const std::string& merged_name, const std::string& data_dir) {
  const auto env = make_environment(spec);
  std::vector<std::vector<MethodResult>> slots(grid.size() * spec.seeds.size());
  std::vector<bool> done(slots.size(), false);
  std::mutex mu;
  fs::create_directories(root);
  const Logger log = o.quiet ? Logger{} : Logger{log_line};

  auto flush = [&] {
    std::vector<MethodResult> rows;
    for (std::size_t i = 0; i < slots.size(); ++i) {
      if (done[i]) rows.insert(rows.end(), slots[i].begin(), slots[i].end());
    }
    write_results_csv((root / merged_name).string(), rows);
  };

  std::vector<std::function<void()>> jobs;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    for (std::size_t si = 0; si < spec.seeds.size(); ++si) {
      jobs.emplace_back([&, g, si] {
        const auto seed = spec.seeds[si];
        const auto point_spec = apply_point(spec, grid[g]);
        const auto dir = nested ? seed_dir(root / grid[g].label, seed) : seed_dir(root, seed);
        const auto data = load_data(data_dir, seed);
        auto rows = run_one(*env, point_spec, seed, grid[g], dir.string(), data ? &*data : nullptr, log);
        std::lock_guard lock(mu);
        slots[g * spec.seeds.size() + si] = std::move(rows);
        done[g * spec.seeds.size() + si] = true;
        flush();
      });
    }
  }
  run_pool(std::move(jobs), o.jobs);
  std::vector<MethodResult> all;
  for (auto& s : slots) all.insert(all.end(), s.begin(), s.end());
  return all;
}

void print_summary(const std::vector<MethodResult>& rows) {
  std::map<std::string, std::pair<double, std::size_t>> by_key;
  std::vector<std::string> order;
  for (const auto& r : rows) {
    const std::string key = r.point.label + " " + transfer::to_string(r.method);
    if (!by_key.count(key)) order.push_back(key);
    by_key[key].first += r.truth.mean_return;
    by_key[key].second += 1;
  }
  for (const auto& k : order) {
    std::printf("%-40s %8.4f  (%zu seeds)\n", k.c_str(), by_key[k].first / by_key[k].second, by_key[k].second);
  }
}

int cmd_run(const CommonOptions& o, const std::string& data_dir) {
  const auto spec = resolve_spec(o);
  const auto root = output_dir(o, spec, "run");
  const auto rows = run_grid(o, spec, {base_point(spec)}, root, false, "results.csv", data_dir);
  print_summary(rows);
  return 0;
}

int cmd_sweep(const CommonOptions& o, const std::string& axis) {
  const auto spec = resolve_spec(o);
  const auto grid = sweep_grid(spec, axis);
  const auto root = output_dir(o, spec, "sweep_" + axis);
  const auto rows = run_grid(o, spec, grid, root, true, "sweep.csv", "");
  print_summary(rows);
  return 0;
}

int cmd_eval(const CommonOptions& o, const std::string& policy_path, const std::string& data_dir) {
  const auto spec = resolve_spec(o);
  const auto env = make_environment(spec);
  const auto pi = policy::load_policy_csv(policy_path);
  const auto root = output_dir(o, spec, "eval");
  fs::create_directories(root);
  for (auto seed : spec.seeds) {
    const auto loaded = load_data(data_dir, seed);
    const auto data = loaded ? *loaded : generate_datasets(*env, spec, seed);
    const SeedPlan plan(seed);
    MethodResult r;
    r.seed = seed;
    r.point = base_point(spec);
    r.point.label = fs::path(policy_path).stem().string();
    r.policy = pi;
    eval::TrueRewardOptions tro;
    tro.p_diab = spec.target.p_diab;
    tro.horizon = spec.source.horizon;
    tro.bootstrap = spec.eval.bootstrap;
    tro.gamma = spec.eval.gamma;
    r.truth = eval::true_reward(pi, env->simulator, spec.eval.n_eval, plan.eval, tro);
    if (spec.eval.wis) {
      try {
        r.wis = eval::wis(data.target, pi, eval::estimate_behavior_policy(data.target), spec.eval.gamma);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::undefined_weight) throw;
      }
    }
    if (spec.eval.cf_pe) {
      const auto target_model = transfer::estimate_transitions(data.target);
      std::optional<transfer::EstimatedModel> source_model;
      eval::CfPeOptions opt;
      opt.w_target = spec.eval.cf_pe_w_target;
      opt.horizon = spec.cfpt.horizon;
      opt.penalty = spec.cfpt.penalty;
      opt.bootstrap = spec.eval.bootstrap;
      if (opt.w_target < 1.0) source_model = transfer::estimate_transitions(data.source);
      auto rep = eval::cf_pe(data.target, pi, target_model.transitions,
                             source_model ? &source_model->transitions : nullptr, opt, plan.cf_pe);
      r.cf_pe = rep.summary;
      r.cf_pe_unchanged = rep.unchanged;
    }
    const auto dir = seed_dir(root, seed);
    fs::create_directories(dir);
    write_file(dir / "report.json", method_report_json(r));
    write_file(dir / "manifest.json", manifest_json(spec, *env, seed, "eval"));
    std::printf("seed %llu: true reward %.4f [%.4f, %.4f]", static_cast<unsigned long long>(seed),
                r.truth.mean_return, r.truth.ci_low, r.truth.ci_high);
    if (r.wis) std::printf("  wis %.4f", *r.wis);
    if (r.cf_pe) std::printf("  cf-pe %.4f", r.cf_pe->mean_return);
    std::printf("\n");
  }
  return 0;
}

int cmd_validate(const CommonOptions& o, bool full) {
  const std::uint64_t seed = o.seed.value_or(1);
  const std::vector<double> weights{0.0, 0.5, 0.8, 1.0};
  std::vector<CheckResult> results;
  results.push_back(check_stability(full ? 1000 : 100, full ? 10000 : 1000, weights, derive_seed(seed, "stability")));
  results.push_back(check_topdown(full ? 100000 : 20000, full ? 0.01 : 0.02, full ? 0.02 : 0.04,
                                  derive_seed(seed, "topdown")));
  results.push_back(check_kl_aggregation(100, 1000, 1e-8, derive_seed(seed, "kl")));
  results.push_back(check_policy_iteration(full ? 200 : 50, derive_seed(seed, "pi")));
  int failed = 0;
  for (const auto& r : results) {
    std::printf("[%s] %s: %s (%.1f s)\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str(), r.seconds);
    failed += r.passed ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Counterfactual policy transfer experiments on a tabular sepsis simulator"};
  app.require_subcommand(1);
  CommonOptions o;

  auto add_common = [&o](CLI::App* sub, bool methods) {
    sub->add_option("--config", o.config, "Experiment spec (YAML)")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "Master seed; overrides the spec's seed list");
    sub->add_option("--out", o.out, "Output directory (default: $CFPT_OUTPUT_ROOT/<command>, else runs/<command>)");
    if (methods) sub->add_option("--methods", o.methods, "Comma-separated methods, or 'all'");
    sub->add_flag("-q,--quiet", o.quiet, "Suppress progress lines");
  };

  auto* gen = app.add_subcommand("generate", "Write source/target datasets and the behavior policy");
  add_common(gen, false);

  std::string data_dir;
  auto* run = app.add_subcommand("run", "Train and evaluate methods for every seed");
  add_common(run, true);
  run->add_option("--data", data_dir, "Directory written by 'generate' to reuse instead of regenerating")
      ->check(CLI::ExistingDirectory);
  run->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);

  std::string axis;
  auto* sweep = app.add_subcommand("sweep", "Run every grid point of one axis");
  add_common(sweep, true);
  sweep->add_option("--axis", axis, "p_diab, target_size or eta_lambda")
      ->required()
      ->check(CLI::IsMember({"p_diab", "target_size", "eta_lambda"}));
  sweep->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);

  std::string policy_path;
  auto* ev = app.add_subcommand("eval", "Re-evaluate a saved policy CSV");
  add_common(ev, false);
  ev->add_option("--policy", policy_path, "Policy CSV")->required()->check(CLI::ExistingFile);
  ev->add_option("--data", data_dir, "Directory written by 'generate'")->check(CLI::ExistingDirectory);

  bool full = false;
  auto* val = app.add_subcommand("validate", "Run the sampling and solver property suites");
  val->add_option("--seed", o.seed, "Seed");
  val->add_flag("--full", full, "Use the full sample sizes (slower)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*gen) return cmd_generate(o);
    if (*run) return cmd_run(o, data_dir);
    if (*sweep) return cmd_sweep(o, axis);
    if (*ev) return cmd_eval(o, policy_path, data_dir);
    if (*val) return cmd_validate(o, full);
  } catch (const cfpt::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
