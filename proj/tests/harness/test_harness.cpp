#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "cfpt/errors.hpp"
#include "cfpt/sim/trajectory.hpp"
#include "harness/experiment_spec.hpp"
#include "harness/runner.hpp"

using namespace cfpt;
using namespace cfpt::harness;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("cfpt_harness_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Small enough to run every method in well under a second per seed.
ExperimentSpec tiny_spec() {
  ExperimentSpec s;
  s.source.n = 200;
  s.target.n = 60;
  s.cfpt.iterations = 1;
  s.eval.n_eval = 100;
  s.eval.bootstrap = 20;
  return s;
}

const Environment& env() {
  static const auto e = make_environment(ExperimentSpec{});
  return *e;
}

std::size_t count_lines(const std::string& text) {
  std::size_t n = 0;
  for (char c : text) n += c == '\n';
  return n;
}

}  // namespace

TEST_CASE("experiment spec defaults") {
  const ExperimentSpec s;
  CHECK(s.source.n == 10000);
  CHECK(s.source.p_diab == 0.1);
  CHECK(s.source.horizon == 20);
  CHECK(s.target.n == 2000);
  CHECK(s.target.p_diab == 0.8);
  CHECK(s.cfpt.epsilon == 0.15);
  CHECK(s.cfpt.iterations == 50);
  CHECK(s.cfpt.w_target == 0.8);
  CHECK(s.cfpt.eta == 0.7);
  CHECK(s.cfpt.lambda == 0.3);
  CHECK(s.eval.n_eval == 5000);
  CHECK(s.eval.bootstrap == 100);
  CHECK(s.methods.size() == transfer::all_methods().size());
  CHECK_NOTHROW(s.validate());
}

TEST_CASE("experiment spec parsing") {
  const auto s = parse_experiment_spec(R"(
source: {n: 500, p_diab: 0.2, epsilon: 0.1}
target: {n: 100, p_diab: 0.9}
cfpt: {iterations: 3, eta: 0.5, source_policy: epsilon_soft, source_policy_param: 0.2}
baselines: {methods: [scratch, cfpt]}
eval: {n_eval: 50, bootstrap: 10, wis: false}
seeds: [3, 4]
)");
  CHECK(s.source.n == 500);
  CHECK(s.source.p_diab == 0.2);
  CHECK(s.cfpt.epsilon == 0.1);
  CHECK(s.target.n == 100);
  CHECK(s.cfpt.iterations == 3);
  CHECK(s.cfpt.eta == 0.5);
  CHECK(s.cfpt.source_policy == transfer::SourcePolicyKind::epsilon_soft);
  CHECK(s.methods == std::vector<transfer::Method>{transfer::Method::scratch, transfer::Method::cfpt});
  CHECK_FALSE(s.eval.wis);
  CHECK(s.seeds == std::vector<std::uint64_t>{3, 4});

  SUBCASE("round trip") {
    const auto back = parse_experiment_spec(experiment_spec_to_yaml(s));
    CHECK(back.source.n == s.source.n);
    CHECK(back.cfpt.eta == s.cfpt.eta);
    CHECK(back.methods == s.methods);
    CHECK(back.seeds == s.seeds);
    CHECK(back.eval.wis == s.eval.wis);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(parse_experiment_spec("sourse: {n: 3}"), Error);
    CHECK_THROWS_AS(parse_experiment_spec("source: {n: 3, bogus: 1}"), Error);
    CHECK_THROWS_AS(parse_experiment_spec("source: {n: 0}"), Error);
    CHECK_THROWS_AS(parse_experiment_spec("target: {p_diab: 1.5}"), Error);
    CHECK_THROWS_AS(parse_experiment_spec("baselines: {methods: [scratch, nope]}"), Error);
    CHECK_THROWS_AS(parse_experiment_spec("source: {epsilon: 0.1}\ncfpt: {epsilon: 0.2}"), Error);
    CHECK_THROWS_AS(parse_method_list("cfpt,bogus"), Error);
    CHECK_THROWS_AS(parse_method_list(" , "), Error);
  }
  CHECK(parse_method_list("all").size() == transfer::all_methods().size());
}

TEST_CASE("the shipped experiment config parses to the defaults") {
  const auto s = load_experiment_spec(std::string(CFPT_SOURCE_DIR) + "/configs/experiment.yaml");
  const ExperimentSpec d;
  CHECK(s.source.n == d.source.n);
  CHECK(s.target.n == d.target.n);
  CHECK(s.cfpt.iterations == d.cfpt.iterations);
  CHECK(s.cfpt.w_target == d.cfpt.w_target);
  CHECK(s.methods == d.methods);
  CHECK(s.seeds.size() == 5);
}

TEST_CASE("sweep grids") {
  const ExperimentSpec s;
  CHECK(sweep_grid(s, "p_diab").size() == 11);
  CHECK(sweep_grid(s, "target_size").size() == 4);
  CHECK(sweep_grid(s, "eta_lambda").size() == 25);
  CHECK_THROWS_AS(sweep_grid(s, "gamma"), Error);
  std::set<std::string> labels;
  for (const auto& p : sweep_grid(s, "eta_lambda")) labels.insert(p.label);
  CHECK(labels.size() == 25);
  const auto p = sweep_grid(s, "target_size")[0];
  const auto applied = apply_point(s, p);
  CHECK(applied.target.n == 500);
  CHECK(applied.target.p_diab == s.target.p_diab);
}

TEST_CASE("seed streams are independent per method") {
  const SeedPlan a(1), b(2);
  CHECK(a.source != b.source);
  CHECK(a.source != a.target);
  CHECK(SeedPlan::method(1, transfer::Method::red_cfpt) == SeedPlan::method(1, transfer::Method::cfpt));
  CHECK(SeedPlan::method(1, transfer::Method::scratch) != SeedPlan::method(1, transfer::Method::cfpt));
}

TEST_CASE("dataset generation") {
  SUBCASE("default sizes") {
    const ExperimentSpec s;
    auto small = tiny_spec();
    small.source.n = s.source.n;
    small.target.n = s.target.n;
    const auto d = generate_datasets(env(), small, 1);
    CHECK(d.source.size() == 10000);
    CHECK(d.target.size() == 2000);
  }
  SUBCASE("p_diab = 1 flags every trajectory") {
    auto s = tiny_spec();
    s.target.p_diab = 1.0;
    s.source.p_diab = 0.0;
    const auto d = generate_datasets(env(), s, 3);
    for (const auto& t : d.target.trajectories) CHECK(t.diabetic);
    for (const auto& t : d.source.trajectories) CHECK_FALSE(t.diabetic);
  }
  SUBCASE("same seed gives byte-identical files") {
    const auto dir = scratch_dir("gen");
    const auto s = tiny_spec();
    sim::save_dataset((dir / "a.jsonl").string(), generate_datasets(env(), s, 5).target);
    sim::save_dataset((dir / "b.jsonl").string(), generate_datasets(env(), s, 5).target);
    sim::save_dataset((dir / "c.jsonl").string(), generate_datasets(env(), s, 6).target);
    CHECK(slurp(dir / "a.jsonl") == slurp(dir / "b.jsonl"));
    CHECK(slurp(dir / "a.jsonl") != slurp(dir / "c.jsonl"));
  }
}

TEST_CASE("run_one over methods and seeds") {
  auto s = tiny_spec();
  s.methods = {transfer::Method::scratch, transfer::Method::cfpt};
  std::vector<MethodResult> rows;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto r = run_one(env(), s, seed, base_point(s), "");
    rows.insert(rows.end(), r.begin(), r.end());
  }
  attach_improvement(rows);
  REQUIRE(rows.size() == 10);
  const auto dir = scratch_dir("rows");
  write_results_csv((dir / "results.csv").string(), rows);
  const auto csv = slurp(dir / "results.csv");
  CHECK(count_lines(csv) == 11);
  CHECK(csv.rfind(results_csv_header(), 0) == 0);
  for (const auto& r : rows) {
    CHECK(r.truth.n_trajectories == s.eval.n_eval);
    REQUIRE(r.improvement_over_scratch.has_value());
    if (r.method == transfer::Method::scratch) CHECK(*r.improvement_over_scratch == 0.0);
  }
}

TEST_CASE("run_one writes identical artifacts for the same seed") {
  auto s = tiny_spec();
  s.methods = {transfer::Method::blind, transfer::Method::regpi};
  const auto a = scratch_dir("det_a"), b = scratch_dir("det_b");
  run_one(env(), s, 9, base_point(s), a.string());
  run_one(env(), s, 9, base_point(s), b.string());
  std::size_t files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), a);
    CHECK_MESSAGE(slurp(entry.path()) == slurp(b / rel), rel.string());
    ++files;
  }
  CHECK(files >= 5);
  CHECK(fs::exists(a / "manifest.json"));
  CHECK(fs::exists(a / "policies" / "blind.csv"));
  CHECK(fs::exists(a / "results.csv"));
  const auto manifest = slurp(a / "manifest.json");
  CHECK(manifest.find("\"true_model_fingerprint\"") != std::string::npos);
  CHECK(manifest.find("\"code_version\"") != std::string::npos);
}

TEST_CASE("adding a method does not perturb another method's result") {
  auto s = tiny_spec();
  s.methods = {transfer::Method::scratch};
  const auto alone = run_one(env(), s, 4, base_point(s), "");
  s.methods = {transfer::Method::random, transfer::Method::scratch};
  const auto both = run_one(env(), s, 4, base_point(s), "");
  CHECK(alone[0].policy == both[1].policy);
  CHECK(alone[0].truth.mean_return == both[1].truth.mean_return);
}

TEST_CASE("Blind only evaluates the source policy") {
  auto s = tiny_spec();
  s.methods = {transfer::Method::blind};
  const auto r = run_one(env(), s, 2, base_point(s), "");
  REQUIRE(r.size() == 1);
  CHECK(r[0].method == transfer::Method::blind);
}

TEST_CASE("missing method inputs fail before training") {
  auto s = tiny_spec();
  s.methods = {transfer::Method::scratch, transfer::Method::cfpt};
  Datasets d;
  d.target = generate_datasets(env(), s, 1).target;
  try {
    run_one(env(), s, 1, base_point(s), "", &d);
    FAIL("expected configuration error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::configuration);
  }
}

TEST_CASE("work pool runs every job and propagates errors") {
  std::atomic<int> done{0};
  std::vector<std::function<void()>> jobs;
  for (int i = 0; i < 8; ++i) jobs.push_back([&] { ++done; });
  run_pool(jobs, 3);
  CHECK(done == 8);
  jobs.push_back([] { throw Error(ErrorCode::io, "boom"); });
  CHECK_THROWS_AS(run_pool(jobs, 2), Error);
}
