#include "runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "cfpt/errors.hpp"
#include "cfpt/policy/policy_csv.hpp"
#include "cfpt/policy/tabular.hpp"
#include "cfpt/random.hpp"
#include "cfpt/sim/dynamics.hpp"
#include "cfpt/transfer/estimate.hpp"

#ifndef CFPT_VERSION
#define CFPT_VERSION "unknown"
#endif
#ifndef CFPT_GIT_REVISION
#define CFPT_GIT_REVISION ""
#endif

namespace cfpt::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string hex(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error(ErrorCode::io, "failed writing " + path.string());
}

void make_dirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::io, "cannot create " + dir.string() + ": " + ec.message());
}

bool needs_source(transfer::Method m) {
  using transfer::Method;
  return m == Method::pooled || m == Method::blind || m == Method::regpi || m == Method::red_cfpt ||
         m == Method::cfpt;
}

std::string records_csv(const eval::CfPeReport& rep) {
  std::ostringstream out;
  out << "id,diabetic,observed_outcome,cf_outcome,observed_return,cf_return\n";
  for (const auto& r : rep.records) {
    out << r.id << ',' << (r.diabetic ? 1 : 0) << ',' << sim::to_string(r.observed_outcome) << ','
        << sim::to_string(r.cf_outcome) << ',' << fmt(r.observed_return) << ',' << fmt(r.cf_return) << '\n';
  }
  return out.str();
}

}  // namespace

const char* code_version() {
  static const std::string v = std::string(CFPT_VERSION) +
                               (std::string(CFPT_GIT_REVISION).empty() ? "" : "+" + std::string(CFPT_GIT_REVISION));
  return v.c_str();
}

std::uint64_t model_fingerprint(const TransitionModel& model) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xffU;
      h *= 1099511628211ULL;
    }
  };
  mix(model.num_states());
  mix(model.num_actions());
  for (std::size_t s = 0; s < model.num_states(); ++s) {
    for (std::size_t a = 0; a < model.num_actions(); ++a) {
      if (!model.supported(s, a)) continue;
      mix(s * model.num_actions() + a);
      const auto& row = model.row(s, a);
      for (std::size_t i = 0; i < row.size(); ++i) {
        std::uint64_t bits = 0;
        static_assert(sizeof(bits) == sizeof(double));
        std::memcpy(&bits, &row.prob[i], sizeof bits);
        mix(row.next[i]);
        mix(bits);
      }
    }
  }
  return h;
}

std::shared_ptr<const Environment> make_environment(const ExperimentSpec& spec) {
  auto dyn = spec.dynamics.empty() ? sim::DynamicsConfig::repo_default() : sim::load_dynamics_config(spec.dynamics);
  sim::SepsisSimulator simulator(std::move(dyn));
  auto opt = policy::policy_iteration(simulator.true_model(), simulator.state_rewards(), spec.behavior_gamma,
                                      policy::kDefaultMaxIterations, policy::PolicyDomain::full_state);
  auto behavior = policy::make_behavior_policy(opt.policy, spec.cfpt.epsilon);
  const auto fp = model_fingerprint(simulator.true_model());
  return std::make_shared<const Environment>(
      Environment{std::move(simulator), std::move(opt.policy), std::move(behavior), fp});
}

SeedPlan::SeedPlan(std::uint64_t master)
    : source(derive_seed(master, "dataset/source")),
      target(derive_seed(master, "dataset/target")),
      eval(derive_seed(master, "eval/true_reward")),
      cf_pe(derive_seed(master, "eval/cf_pe")) {}

std::uint64_t SeedPlan::method(std::uint64_t master, transfer::Method m) {
  if (m == transfer::Method::red_cfpt) m = transfer::Method::cfpt;
  return derive_seed(master, std::string("method/") + transfer::to_string(m));
}

Datasets generate_datasets(const Environment& env, const ExperimentSpec& spec, std::uint64_t seed) {
  const SeedPlan plan(seed);
  Datasets d;
  d.source = sim::generate_dataset(env.simulator, env.behavior, spec.source.n, spec.source.p_diab,
                                   spec.source.horizon, plan.source);
  d.target = sim::generate_dataset(env.simulator, env.behavior, spec.target.n, spec.target.p_diab,
                                   spec.source.horizon, plan.target);
  return d;
}

GridPoint base_point(const ExperimentSpec& spec) {
  return GridPoint{spec.target.p_diab, spec.target.n, spec.cfpt.eta, spec.cfpt.lambda, "base"};
}

std::vector<GridPoint> sweep_grid(const ExperimentSpec& spec, const std::string& axis) {
  std::vector<GridPoint> grid;
  const GridPoint base = base_point(spec);
  if (axis == "p_diab") {
    for (double p : spec.sweep.p_diab) {
      GridPoint g = base;
      g.p_diab = p;
      g.label = "p_diab_" + fmt(p);
      grid.push_back(g);
    }
  } else if (axis == "target_size") {
    for (auto n : spec.sweep.target_size) {
      GridPoint g = base;
      g.target_size = n;
      g.label = "target_size_" + std::to_string(n);
      grid.push_back(g);
    }
  } else if (axis == "eta_lambda") {
    for (double e : spec.sweep.eta) {
      for (double l : spec.sweep.lambda) {
        GridPoint g = base;
        g.eta = e;
        g.lambda = l;
        g.label = "eta_" + fmt(e) + "_lambda_" + fmt(l);
        grid.push_back(g);
      }
    }
  } else {
    throw Error(ErrorCode::invalid_config, "unknown sweep axis '" + axis + "' (p_diab, target_size, eta_lambda)");
  }
  if (grid.empty()) throw Error(ErrorCode::invalid_config, "sweep axis " + axis + " has no grid points");
  return grid;
}

ExperimentSpec apply_point(ExperimentSpec spec, const GridPoint& point) {
  spec.target.p_diab = point.p_diab;
  spec.target.n = point.target_size;
  spec.cfpt.eta = point.eta;
  spec.cfpt.lambda = point.lambda;
  spec.validate();
  return spec;
}

std::vector<MethodResult> run_one(const Environment& env, const ExperimentSpec& spec, std::uint64_t seed,
                                  const GridPoint& point, const std::string& run_dir, const Datasets* data,
                                  const Logger& log) {
  spec.validate();
  const SeedPlan plan(seed);
  auto say = [&](const std::string& msg) {
    if (log) log(msg);
  };

  bool want_source = false;
  for (auto m : spec.methods) want_source = want_source || needs_source(m);

  // Check every method against the inputs this run will provide before training anything.
  {
    const sim::Dataset placeholder;
    const transfer::EstimatedModel placeholder_model;
    const policy::StochasticPolicy placeholder_policy;
    // Supplied datasets count as missing when empty.
    const bool have_source = data == nullptr || !data->source.empty();
    const bool have_target = data == nullptr || !data->target.empty();
    transfer::TransferInputs planned{have_source ? &placeholder : nullptr, have_target ? &placeholder : nullptr,
                                     want_source && have_source ? &placeholder_model : nullptr,
                                     want_source && have_source ? &placeholder_policy : nullptr};
    for (auto m : spec.methods) {
      const auto missing = transfer::missing_inputs(m, planned);
      if (!missing.empty()) {
        throw Error(ErrorCode::configuration, std::string(transfer::to_string(m)) + " is missing " + missing.front());
      }
    }
    // WIS and CF-PE read the target data whatever the method.
    if (!have_target) throw Error(ErrorCode::configuration, "the supplied target dataset is empty");
  }

  Datasets generated;
  if (data == nullptr) {
    generated = generate_datasets(env, spec, seed);
    data = &generated;
  }

  std::optional<transfer::EstimatedModel> source_model;
  std::optional<policy::StochasticPolicy> source_policy;
  if (want_source) {
    source_model = transfer::estimate_transitions(data->source);
    source_policy = transfer::make_source_policy(*source_model, spec.cfpt);
  }
  const transfer::TransferInputs inputs{&data->source, &data->target, source_model ? &*source_model : nullptr,
                                        source_policy ? &*source_policy : nullptr};

  const auto target_model = transfer::estimate_transitions(data->target);
  const auto mu_hat = eval::estimate_behavior_policy(data->target);

  fs::path dir;
  if (!run_dir.empty()) {
    dir = run_dir;
    make_dirs(dir / "policies");
    make_dirs(dir / "reports");
    if (spec.eval.cf_pe) make_dirs(dir / "cf_pe");
    write_text(dir / "manifest.json", manifest_json(spec, env, seed, "run"));
  }

  eval::TrueRewardOptions tro;
  tro.p_diab = spec.target.p_diab;
  tro.horizon = spec.source.horizon;
  tro.bootstrap = spec.eval.bootstrap;
  tro.gamma = spec.eval.gamma;

  std::vector<MethodResult> rows;
  for (auto m : spec.methods) {
    MethodResult r;
    r.method = m;
    r.seed = seed;
    r.point = point;
    const auto t0 = std::chrono::steady_clock::now();
    r.policy = transfer::run_baseline(m, inputs, spec.cfpt, SeedPlan::method(seed, m));
    r.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    r.truth = eval::true_reward(r.policy, env.simulator, spec.eval.n_eval, plan.eval, tro);
    if (spec.eval.wis) {
      try {
        r.wis = eval::wis(data->target, r.policy, mu_hat, spec.eval.gamma);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::undefined_weight) throw;
      }
    }
    if (spec.eval.cf_pe) {
      eval::CfPeOptions o;
      o.w_target = spec.eval.cf_pe_w_target;
      o.horizon = spec.cfpt.horizon;
      o.penalty = spec.cfpt.penalty;
      o.bootstrap = spec.eval.bootstrap;
      std::optional<transfer::EstimatedModel> src_for_pe;
      if (o.w_target < 1.0 && !source_model) src_for_pe = transfer::estimate_transitions(data->source);
      const TransitionModel* src = o.w_target < 1.0 ? &(source_model ? *source_model : *src_for_pe).transitions
                                                    : nullptr;
      auto rep = eval::cf_pe(data->target, r.policy, target_model.transitions, src, o, plan.cf_pe);
      r.cf_pe = rep.summary;
      r.cf_pe_unchanged = rep.unchanged;
      if (!run_dir.empty()) {
        write_text(dir / "cf_pe" / (std::string(transfer::to_string(m)) + ".csv"), records_csv(rep));
      }
    }
    say(std::string(transfer::to_string(m)) + " seed " + std::to_string(seed) + " [" + point.label +
        "]: true reward " + fmt(r.truth.mean_return) + " [" + fmt(r.truth.ci_low) + ", " + fmt(r.truth.ci_high) +
        "] wis " + (r.wis ? fmt(*r.wis) : std::string("n/a")) + " (" + fmt(r.train_seconds) + " s)");
    if (!run_dir.empty()) {
      policy::save_policy_csv((dir / "policies" / (std::string(transfer::to_string(m)) + ".csv")).string(),
                              r.policy);
      write_text(dir / "reports" / (std::string(transfer::to_string(m)) + ".json"), method_report_json(r));
    }
    rows.push_back(std::move(r));
  }
  attach_improvement(rows);
  if (!run_dir.empty()) write_results_csv((dir / "results.csv").string(), rows);
  return rows;
}

void attach_improvement(std::vector<MethodResult>& rows) {
  for (auto& r : rows) {
    r.improvement_over_scratch.reset();
    for (const auto& s : rows) {
      if (s.method == transfer::Method::scratch && s.seed == r.seed && s.point.label == r.point.label) {
        r.improvement_over_scratch = r.truth.mean_return - s.truth.mean_return;
      }
    }
  }
}

std::string results_csv_header() {
  return "env_pdiab,dataset_size,eta,lambda,grid_point,method,seed,true_reward,ci_low,ci_high,wis,"
         "discharge,death,censored,penalty,diabetic_n,diabetic_reward,non_diabetic_n,non_diabetic_reward,"
         "cf_pe_reward,cf_pe_ci_low,cf_pe_ci_high,cf_pe_unchanged,improvement_over_scratch";
}

std::string results_csv_row(const MethodResult& r) {
  std::ostringstream out;
  const auto& t = r.truth;
  out << fmt(r.point.p_diab) << ',' << r.point.target_size << ',' << fmt(r.point.eta) << ',' << fmt(r.point.lambda)
      << ',' << r.point.label << ',' << transfer::to_string(r.method) << ',' << r.seed << ',' << fmt(t.mean_return)
      << ',' << fmt(t.ci_low) << ',' << fmt(t.ci_high) << ',' << (r.wis ? fmt(*r.wis) : "");
  for (double f : t.outcomes) out << ',' << fmt(f);
  out << ',' << t.diabetic.n_trajectories << ',' << fmt(t.diabetic.mean_return) << ','
      << t.non_diabetic.n_trajectories << ',' << fmt(t.non_diabetic.mean_return);
  if (r.cf_pe) {
    out << ',' << fmt(r.cf_pe->mean_return) << ',' << fmt(r.cf_pe->ci_low) << ',' << fmt(r.cf_pe->ci_high) << ','
        << r.cf_pe_unchanged;
  } else {
    out << ",,,,";
  }
  out << ',' << (r.improvement_over_scratch ? fmt(*r.improvement_over_scratch) : "");
  return out.str();
}

void write_results_csv(const std::string& path, const std::vector<MethodResult>& rows) {
  std::ostringstream out;
  out << results_csv_header() << '\n';
  for (const auto& r : rows) out << results_csv_row(r) << '\n';
  write_text(path, out.str());
}

std::string method_report_json(const MethodResult& r) {
  json j;
  j["method"] = transfer::to_string(r.method);
  j["seed"] = r.seed;
  j["grid_point"] = r.point.label;
  j["true_reward"] = json::parse(eval::report_to_json(r.truth));
  j["wis"] = r.wis ? json(*r.wis) : json(nullptr);
  if (r.cf_pe) {
    j["cf_pe"] = json::parse(eval::report_to_json(*r.cf_pe));
    j["cf_pe"]["unchanged"] = r.cf_pe_unchanged;
  }
  j["improvement_over_scratch"] = r.improvement_over_scratch ? json(*r.improvement_over_scratch) : json(nullptr);
  return j.dump(2) + "\n";
}

std::string manifest_json(const ExperimentSpec& spec, const Environment& env, std::uint64_t seed,
                          const std::string& kind) {
  const SeedPlan plan(seed);
  json j;
  j["kind"] = kind;
  j["code_version"] = code_version();
  j["seed"] = seed;
  j["seeds"] = {{"dataset_source", plan.source},
                {"dataset_target", plan.target},
                {"eval", plan.eval},
                {"cf_pe", plan.cf_pe}};
  j["true_model_fingerprint"] = hex(env.fingerprint);
  j["dynamics"] = spec.dynamics.empty() ? "builtin" : spec.dynamics;
  j["spec"] = experiment_spec_to_yaml(spec);
  return j.dump(2) + "\n";
}

std::string default_output_root(const ExperimentSpec& spec) {
  if (!spec.output_dir.empty()) return spec.output_dir;
  if (const char* env = std::getenv("CFPT_OUTPUT_ROOT"); env != nullptr && *env != '\0') return env;
  return "runs";
}

void run_pool(std::vector<std::function<void()>> jobs, std::size_t workers) {
  workers = std::max<std::size_t>(1, std::min(workers, jobs.size()));
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;
  auto work = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        jobs[i]();
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace cfpt::harness
