#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "cfpt/errors.hpp"
#include "cfpt/policy/policy_csv.hpp"
#include "cfpt/policy/tabular.hpp"
#include "test_util.hpp"

using namespace cfpt;
using namespace cfpt::policy;

namespace {

// s0 --a0--> s1 with reward 1, a1 stays in s0 with reward 0; s1 absorbs with reward 0.
testutil::SmallMdp two_state_chain() {
  testutil::SmallMdp m{TransitionModel(2, 2), RewardTable{2, 2, {1.0, 0.0, 0.0, 0.0}, {0, 0, 0, 0}, -1.0}};
  m.model.set_row(0, 0, SparseRow{{1}, {1.0}});
  m.model.set_row(0, 1, SparseRow{{0}, {1.0}});
  m.model.set_row(1, 0, SparseRow{{1}, {1.0}});
  m.model.set_row(1, 1, SparseRow{{1}, {1.0}});
  return m;
}

std::vector<std::vector<double>> rows_of(const StochasticPolicy& pi) {
  std::vector<std::vector<double>> out(pi.num_rows());
  for (std::size_t r = 0; r < pi.num_rows(); ++r) out[r].assign(pi.row(r).begin(), pi.row(r).end());
  return out;
}

}  // namespace

TEST_CASE("StochasticPolicy rows stay distributions") {
  StochasticPolicy pi(3, 4);
  CHECK(pi.prob(0, 0) == 0.25);
  CHECK_THROWS_AS(pi.set_row(0, std::vector<double>{0.5, 0.5, 0.5, 0.0}), Error);
  CHECK_THROWS_AS(pi.set_row(0, std::vector<double>{1.5, -0.5, 0.0, 0.0}), Error);
  pi.set_deterministic(1, 2);
  CHECK(pi.greedy(1) == 2);
  CHECK(pi.greedy(0) == 0);  // lowest index wins ties
}

TEST_CASE("policy evaluation") {
  SUBCASE("gamma 0 gives the expected immediate reward") {
    std::mt19937_64 eng(1);
    const auto m = testutil::random_mdp(5, 3, eng);
    const StochasticPolicy pi(5, 3);
    const auto v = policy_evaluation(pi, m.model, m.rewards, 0.0);
    for (std::size_t s = 0; s < 5; ++s) {
      double r = 0.0;
      for (std::size_t a = 0; a < 3; ++a) r += m.rewards.at(s, a) / 3.0;
      CHECK(v[s] == doctest::Approx(r).epsilon(1e-12));
    }
  }
  SUBCASE("two-state chain: V(s0) = 1 under the rewarding action") {
    const auto m = two_state_chain();
    const std::vector<std::size_t> acts{0, 0};
    const auto v = policy_evaluation(StochasticPolicy::deterministic(acts, 2), m.model, m.rewards, 0.9);
    const auto exact = testutil::exact_values(m, {{1.0, 0.0}, {1.0, 0.0}}, 0.9);
    CHECK(v[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(v[0] == doctest::Approx(exact[0]).epsilon(1e-9));
    CHECK(v[1] == doctest::Approx(0.0).epsilon(1e-9));
  }
  SUBCASE("matches an exact linear solve on random MDPs") {
    std::mt19937_64 eng(2);
    for (int t = 0; t < 20; ++t) {
      const auto m = testutil::random_mdp(10, 3, eng);
      std::vector<double> probs;
      for (int s = 0; s < 10; ++s) {
        const auto r = testutil::random_distribution(3, 0.3, eng);
        probs.insert(probs.end(), r.begin(), r.end());
      }
      const auto pi = StochasticPolicy::from_matrix(10, 3, probs);
      const auto v = policy_evaluation(pi, m.model, m.rewards, 0.95);
      const auto exact = testutil::exact_values(m, rows_of(pi), 0.95);
      for (std::size_t s = 0; s < 10; ++s) CHECK(std::abs(v[s] - exact[s]) < 1e-8);
      CHECK(bellman_residual(pi, m.model, m.rewards, 0.95, v) <= kDefaultEvalTolerance);
    }
  }
  SUBCASE("symmetric MDP under a symmetric policy") {
    testutil::SmallMdp m{TransitionModel(2, 1), RewardTable{2, 1, {0.5, 0.5}, {0, 0}, -1.0}};
    m.model.set_row(0, 0, SparseRow{{0, 1}, {0.3, 0.7}});
    m.model.set_row(1, 0, SparseRow{{0, 1}, {0.7, 0.3}});
    const auto v = policy_evaluation(StochasticPolicy(2, 1), m.model, m.rewards, 0.9);
    CHECK(v[0] == doctest::Approx(v[1]).epsilon(1e-12));
  }
  SUBCASE("bad inputs") {
    const auto m = two_state_chain();
    CHECK_THROWS_AS(policy_evaluation(StochasticPolicy(2, 2), m.model, m.rewards, 1.0), Error);
    TransitionModel broken(2, 2);
    broken.set_row(0, 0, SparseRow{{0, 1}, {0.5, 0.6}});
    try {
      policy_evaluation(StochasticPolicy(2, 2), broken, m.rewards, 0.9);
      FAIL("expected invalid_model");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::invalid_model);
    }
  }
}

TEST_CASE("terminal and unsupported pairs are valued by reward and penalty") {
  TransitionModel model(2, 3);
  model.set_row(0, 0, SparseRow{{1}, {1.0}});
  model.set_row(1, 0, SparseRow{{1}, {1.0}});
  RewardTable r{2, 3, {0.0, 1.0, 0.0, 0.0, 0.0, 0.0}, {0, 1, 0, 0, 0, 0}, -0.5};
  const std::vector<double> v{3.0, 2.0};
  CHECK(action_value(model, r, 0.9, v, 0, 0) == doctest::Approx(1.8));
  CHECK(action_value(model, r, 0.9, v, 0, 1) == 1.0);   // terminal
  CHECK(action_value(model, r, 0.9, v, 0, 2) == -0.5);  // unsupported
}

TEST_CASE("policy iteration") {
  SUBCASE("two-state chain picks the rewarding action") {
    const auto m = two_state_chain();
    const auto res = policy_iteration(m.model, m.rewards, 0.9);
    CHECK(res.converged);
    CHECK(res.policy.greedy(0) == 0);
  }
  SUBCASE("gamma 0 is the per-state argmax of reward") {
    std::mt19937_64 eng(3);
    const auto m = testutil::random_mdp(8, 4, eng);
    const auto res = policy_iteration(m.model, m.rewards, 0.0);
    for (std::size_t s = 0; s < 8; ++s) {
      std::size_t best = 0;
      for (std::size_t a = 1; a < 4; ++a) {
        if (m.rewards.at(s, a) > m.rewards.at(s, best)) best = a;
      }
      CHECK(res.policy.greedy(s) == best);
    }
  }
  SUBCASE("values match value iteration on random 10-state MDPs") {
    std::mt19937_64 eng(4);
    for (int t = 0; t < 30; ++t) {
      const auto m = testutil::random_mdp(10, 3, eng);
      const auto res = policy_iteration(m.model, m.rewards, 0.9);
      const auto vi = testutil::value_iteration(m, 0.9);
      CHECK(res.converged);
      for (std::size_t s = 0; s < 10; ++s) CHECK(std::abs(res.values[s] - vi[s]) < 1e-6);
    }
  }
  SUBCASE("result is stable under one more improvement step") {
    std::mt19937_64 eng(5);
    const auto m = testutil::random_mdp(12, 4, eng);
    const auto res = policy_iteration(m.model, m.rewards, 0.95);
    for (std::size_t s = 0; s < 12; ++s) {
      std::vector<double> q(4);
      for (std::size_t a = 0; a < 4; ++a) q[a] = action_value(m.model, m.rewards, 0.95, res.values, s, a);
      CHECK(tolerant_argmax(q) == res.policy.greedy(s));
    }
  }
}

TEST_CASE("tolerant argmax prefers the lowest index among near-ties") {
  CHECK(tolerant_argmax(std::vector<double>{1.0, 1.0 + 1e-9, 0.5}) == 0);
  CHECK(tolerant_argmax(std::vector<double>{1.0, 1.0 + 1e-3, 0.5}) == 1);
}

TEST_CASE("behavior policy softening") {
  const std::vector<std::size_t> acts{3, 0};
  const auto opt = StochasticPolicy::deterministic(acts, 8);
  CHECK(make_behavior_policy(opt, 0.0) == opt);
  const auto uni = make_behavior_policy(opt, 1.0);
  for (std::size_t a = 0; a < 8; ++a) CHECK(uni.prob(0, a) == doctest::Approx(0.125));
  const auto mu = make_behavior_policy(opt, 0.15);
  CHECK(mu.prob(0, 3) == doctest::Approx(0.86875));
  CHECK(mu.prob(0, 1) == doctest::Approx(0.01875));
}

TEST_CASE("proposal distribution") {
  SUBCASE("hand-computed two-action case: Q = (2, 1) gives (1, 0)") {
    TransitionModel model(1, 2);
    RewardTable r{1, 2, {2.0, 1.0}, {1, 1}, -1.0};
    const std::vector<double> v{0.0};
    const auto nu = proposal_distribution(v, model, r, 0.9, 0);
    CHECK(nu[0] == doctest::Approx(1.0));
    CHECK(nu[1] == doctest::Approx(0.0));
  }
  SUBCASE("identical values give a uniform proposal") {
    TransitionModel model(1, 3);
    RewardTable r{1, 3, {0.5, 0.5, 0.5}, {1, 1, 1}, -1.0};
    const std::vector<double> v{0.0};
    const auto nu = proposal_distribution(v, model, r, 0.9, 0);
    for (double x : nu) CHECK(x == doctest::Approx(1.0 / 3.0));
  }
  SUBCASE("shifted values otherwise") {
    TransitionModel model(1, 3);
    RewardTable r{1, 3, {3.0, 1.0, 2.0}, {1, 1, 1}, -1.0};
    const std::vector<double> v{0.0};
    const auto nu = proposal_distribution(v, model, r, 0.9, 0);
    CHECK(nu[0] == doctest::Approx(2.0 / 3.0));
    CHECK(nu[1] == 0.0);
    CHECK(nu[2] == doctest::Approx(1.0 / 3.0));
  }
  SUBCASE("no available action") {
    TransitionModel model(1, 2);
    RewardTable r{1, 2, {0.0, 0.0}, {0, 0}, -1.0};
    const std::vector<double> v{0.0};
    try {
      proposal_distribution(v, model, r, 0.9, 0);
      FAIL("expected empty_support");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::empty_support);
    }
  }
}

TEST_CASE("KL aggregation") {
  const std::vector<double> nu{0.9, 0.1}, src{0.5, 0.5};
  CHECK(kl_aggregate(nu, src, 1.0) == nu);
  CHECK(kl_aggregate(nu, src, 0.0) == src);
  const auto mid = kl_aggregate(nu, src, 0.5);
  CHECK(mid[0] == doctest::Approx(0.75));
  CHECK(mid[1] == doctest::Approx(0.25));

  SUBCASE("minimizes the objective over a fine grid") {
    // Independent objective; grid step 1e-4 on the 2-simplex.
    auto f = [&](double x) {
      const double p[2] = {x, 1.0 - x};
      double s = 0.0;
      for (int a = 0; a < 2; ++a) {
        if (p[a] > 0.0) s += p[a] * (0.5 * std::log(p[a] / nu[a]) + 0.5 * std::log(p[a] / src[a]));
      }
      return s;
    };
    double best = 1e300;
    for (int i = 0; i <= 10000; ++i) best = std::min(best, f(i / 10000.0));
    CHECK(f(mid[0]) <= best + 1e-12);
    CHECK(kl_objective(mid, nu, src, 0.5) == doctest::Approx(f(mid[0])).epsilon(1e-12));
  }
  SUBCASE("zero source mass forces zero aggregated mass") {
    const std::vector<double> n3{0.5, 0.3, 0.2}, s3{0.0, 0.5, 0.5};
    const auto out = kl_aggregate(n3, s3, 0.3);
    CHECK(out[0] == 0.0);
    CHECK(out[1] + out[2] == doctest::Approx(1.0));
  }
  SUBCASE("disjoint supports have no feasible policy") {
    const std::vector<double> a{1.0, 0.0}, b{0.0, 1.0};
    try {
      kl_aggregate(a, b, 0.5);
      FAIL("expected no_feasible_policy");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::no_feasible_policy);
    }
  }
  SUBCASE("never worse than either endpoint") {
    std::mt19937_64 eng(6);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 200; ++t) {
      const auto n = testutil::random_distribution(5, 0.0, eng);
      const auto s = testutil::random_distribution(5, 0.0, eng);
      const double lam = u(eng);
      const auto out = kl_aggregate(n, s, lam);
      const double f = kl_objective(out, n, s, lam);
      CHECK(f <= kl_objective(n, n, s, lam) + 1e-12);
      CHECK(f <= kl_objective(s, n, s, lam) + 1e-12);
    }
  }
}

TEST_CASE("regularized policy iteration") {
  std::mt19937_64 eng(7);
  const auto m = testutil::random_mdp(10, 4, eng);
  std::vector<double> sp;
  for (int s = 0; s < 10; ++s) {
    const auto r = testutil::random_distribution(4, 0.0, eng);
    sp.insert(sp.end(), r.begin(), r.end());
  }
  const auto source = StochasticPolicy::from_matrix(10, 4, sp);
  const StochasticPolicy uniform(10, 4);

  SUBCASE("lambda 1 equals policy iteration") {
    const auto reg = reg_pi(uniform, 0.9, m.model, m.rewards, source, 1.0);
    CHECK(reg.policy == policy_iteration(m.model, m.rewards, 0.9).policy);
  }
  SUBCASE("lambda 0 is the source argmax") {
    const auto reg = reg_pi(uniform, 0.9, m.model, m.rewards, source, 0.0);
    CHECK(reg.policy == source.greedy_projection());
  }
  SUBCASE("rows stay distributions") {
    const auto reg = reg_pi(uniform, 0.9, m.model, m.rewards, source, 0.5);
    for (std::size_t s = 0; s < 10; ++s) {
      double t = 0.0;
      for (double p : reg.aggregated.row(s)) t += p;
      CHECK(t == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("reg_pi at lambda 0.5 is no worse than the source argmax") {
  // Exact evaluation of both deterministic policies by a linear solve.
  std::mt19937_64 eng(8);
  for (int t = 0; t < 30; ++t) {
    const auto m = testutil::random_mdp(10, 3, eng);
    std::vector<double> sp;
    for (int s = 0; s < 10; ++s) {
      const auto r = testutil::random_distribution(3, 0.0, eng);
      sp.insert(sp.end(), r.begin(), r.end());
    }
    const auto source = StochasticPolicy::from_matrix(10, 3, sp);
    const auto reg = reg_pi(StochasticPolicy(10, 3), 0.9, m.model, m.rewards, source, 0.5);
    const auto v_reg = testutil::exact_values(m, rows_of(reg.policy), 0.9);
    const auto v_src = testutil::exact_values(m, rows_of(source.greedy_projection()), 0.9);
    for (std::size_t s = 0; s < 10; ++s) CHECK(v_reg[s] >= v_src[s] - 1e-9);
  }
}

TEST_CASE("reg_pi stops on a converged or revisited policy") {
  std::mt19937_64 eng(10);
  std::size_t cycles = 0;
  for (int t = 0; t < 200; ++t) {
    const auto m = testutil::random_mdp(8, 4, eng);
    std::vector<double> sp;
    for (int s = 0; s < 8; ++s) {
      const auto r = testutil::random_distribution(4, 0.0, eng);
      sp.insert(sp.end(), r.begin(), r.end());
    }
    const auto source = StochasticPolicy::from_matrix(8, 4, sp);
    const double lambda = std::uniform_real_distribution<double>(0.05, 0.95)(eng);
    const auto reg = reg_pi(StochasticPolicy(8, 4), 0.95, m.model, m.rewards, source, lambda, 1000);
    CHECK(reg.iterations < 1000);
    CHECK(reg.converged != (reg.cycle_length > 0));
    cycles += reg.cycle_length > 0;
    // The reported values belong to the returned policy.
    const auto v = testutil::exact_values(m, rows_of(reg.policy), 0.95);
    for (std::size_t s = 0; s < 8; ++s) CHECK(reg.values[s] == doctest::Approx(v[s]).epsilon(1e-6));
  }
  MESSAGE("cycles: " << cycles);
}

TEST_CASE("policy CSV round-trips") {
  std::mt19937_64 eng(9);
  std::vector<double> probs;
  for (int s = 0; s < 720; ++s) {
    const auto r = testutil::random_distribution(8, 0.5, eng);
    probs.insert(probs.end(), r.begin(), r.end());
  }
  const auto pi = StochasticPolicy::from_matrix(720, 8, probs);
  std::stringstream buf;
  write_policy_csv(buf, pi);
  const auto header = buf.str().substr(0, buf.str().find('\n'));
  CHECK(header == "obs,none,vent,vaso,vaso+vent,abx,abx+vent,abx+vaso,abx+vaso+vent");
  CHECK(read_policy_csv(buf) == pi);

  std::stringstream bad("obs,a\n0,0.5\n");
  CHECK_THROWS_AS(read_policy_csv(bad), Error);
}
