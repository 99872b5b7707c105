#include <doctest.h>

#include <map>
#include <random>
#include <sstream>

#include "cfpt/errors.hpp"
#include "cfpt/transfer/estimate.hpp"
#include "test_util.hpp"

using namespace cfpt;
using namespace cfpt::transfer;

namespace {

sim::Trajectory path(std::initializer_list<std::pair<std::uint32_t, std::uint8_t>> steps, bool diabetic = false) {
  sim::Trajectory t;
  t.diabetic = diabetic;
  for (auto [obs, a] : steps) {
    const auto state = static_cast<std::uint32_t>(sim::state_of(obs, diabetic));
    t.steps.push_back(sim::Step{state, obs, a, 0.0});
  }
  return t;
}

}  // namespace

TEST_CASE("single transition") {
  sim::Dataset d;
  d.trajectories.push_back(path({{10, 2}, {11, 0}}));
  const auto est = estimate_transitions(d);
  CHECK(est.supported(10, 2));
  CHECK(est.transitions.num_supported() == 1);
  CHECK(est.transitions.row(10, 2).mass(11) == 1.0);
  CHECK(est.count(10, 2) == 1);
  CHECK_FALSE(est.supported(11, 0));  // last step has no successor
}

TEST_CASE("counts 3:1 give (0.75, 0.25)") {
  sim::Dataset d;
  for (int i = 0; i < 3; ++i) d.trajectories.push_back(path({{5, 1}, {6, 0}}));
  d.trajectories.push_back(path({{5, 1}, {7, 0}}));
  const auto est = estimate_transitions(d);
  CHECK(est.transitions.row(5, 1).mass(6) == doctest::Approx(0.75));
  CHECK(est.transitions.row(5, 1).mass(7) == doctest::Approx(0.25));
  CHECK(est.count(5, 1) == 4);
}

TEST_CASE("full-state estimates keep the hidden flag apart") {
  sim::Dataset d;
  d.trajectories.push_back(path({{5, 1}, {6, 0}}, false));
  d.trajectories.push_back(path({{5, 1}, {7, 0}}, true));
  const auto obs = estimate_transitions(d);
  CHECK(obs.transitions.row(5, 1).size() == 2);
  const auto full = estimate_transitions(d, StateSpace::full_state);
  CHECK(full.transitions.row(5, 1).mass(6) == 1.0);
  CHECK(full.transitions.row(5 + 720, 1).mass(7 + 720) == 1.0);
}

TEST_CASE("empty dataset") {
  try {
    estimate_transitions(sim::Dataset{});
    FAIL("expected empty_dataset");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::empty_dataset);
  }
}

TEST_CASE("estimates concentrate on a known model") {
  // Known 5-state, 2-action chain simulated for 10^5 steps.
  std::mt19937_64 eng(1);
  const std::size_t ns = 5;
  std::vector<std::vector<std::vector<double>>> truth(ns, std::vector<std::vector<double>>(2));
  for (auto& s : truth) {
    for (auto& row : s) row = testutil::random_distribution(ns, 0.3, eng);
  }
  sim::Dataset d;
  std::uniform_int_distribution<int> act(0, 1);
  std::size_t steps = 0;
  while (steps < 100000) {
    sim::Trajectory t;
    std::uint32_t s = static_cast<std::uint32_t>(eng() % ns);
    for (int i = 0; i < 20; ++i) {
      const auto a = static_cast<std::uint8_t>(act(eng));
      t.steps.push_back(sim::Step{s, s, a, 0.0});
      std::discrete_distribution<std::uint32_t> next(truth[s][a].begin(), truth[s][a].end());
      s = next(eng);
      ++steps;
    }
    d.trajectories.push_back(std::move(t));
  }
  const auto est = estimate_transitions(d);
  for (std::uint32_t s = 0; s < ns; ++s) {
    for (std::uint8_t a = 0; a < 2; ++a) {
      if (est.count(s, a) < 200) continue;
      double l1 = 0.0;
      for (std::uint32_t j = 0; j < ns; ++j) l1 += std::abs(est.transitions.row(s, a).mass(j) - truth[s][a][j]);
      CHECK(l1 <= 0.05);
    }
  }
}

TEST_CASE("augmentation") {
  TransitionModel pt(3, 1), ph(3, 1);
  pt.set_row(0, 0, SparseRow{{0}, {1.0}});
  ph.set_row(0, 0, SparseRow{{1}, {1.0}});
  pt.set_row(1, 0, SparseRow{{1, 2}, {0.5, 0.5}});
  ph.set_row(2, 0, SparseRow{{0}, {1.0}});

  SUBCASE("eta 0.5 midpoint") {
    const auto p = augment_transitions(pt, ph, 0.5);
    CHECK(p.row(0, 0).mass(0) == doctest::Approx(0.5));
    CHECK(p.row(0, 0).mass(1) == doctest::Approx(0.5));
  }
  SUBCASE("support is the union of the inputs") {
    const auto p = augment_transitions(pt, ph, 0.3);
    CHECK(p.supported(0, 0));
    CHECK(p.supported(1, 0));
    CHECK(p.supported(2, 0));
    CHECK(p.row(1, 0) == pt.row(1, 0));
    CHECK(p.row(2, 0) == ph.row(2, 0));
    p.check_stochastic(1e-12);
  }
  SUBCASE("endpoints") {
    CHECK(augment_transitions(pt, ph, 1.0).row(0, 0) == pt.row(0, 0));
    CHECK(augment_transitions(pt, ph, 0.0).row(0, 0) == ph.row(0, 0));
  }
  SUBCASE("rows in neither input stay unsupported") {
    TransitionModel a(2, 1), b(2, 1);
    a.set_row(0, 0, SparseRow{{0}, {1.0}});
    CHECK_FALSE(augment_transitions(a, b, 0.5).supported(1, 0));
  }
}

TEST_CASE("model CSV round-trips") {
  std::mt19937_64 eng(2);
  TransitionModel m(6, 3);
  for (std::size_t s = 0; s < 6; ++s) {
    for (std::size_t a = 0; a < 3; ++a) {
      if ((s + a) % 4 == 0) continue;
      m.set_row(s, a, testutil::sparse(testutil::random_distribution(6, 0.4, eng)));
    }
  }
  std::stringstream buf;
  write_model_csv(buf, m);
  CHECK(buf.str().rfind("obs,action,next_obs,prob\n", 0) == 0);
  CHECK(read_model_csv(buf, 6, 3) == m);
  std::stringstream bad("obs,action,next_obs,prob\n9,0,0,1\n");
  CHECK_THROWS_AS(read_model_csv(bad, 6, 3), Error);
}
