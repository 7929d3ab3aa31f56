#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "pomdp_oracle.hpp"

using namespace tddm;
using namespace tddm::pomdp;

namespace {

const char* kTiger = R"(# classic tiger problem
discount: 0.95
states: tiger-left tiger-right
actions: listen open-left open-right
observations: hear-left hear-right
start: 0.5 0.5
T: listen
1 0
0 1
T: open-left
0.5 0.5
0.5 0.5
T: open-right
0.5 0.5
0.5 0.5
O: listen
0.85 0.15
0.15 0.85
O: open-left
0.5 0.5
0.5 0.5
O: open-right
0.5 0.5
0.5 0.5
R:
-1 -100 10
-1 10 -100
)";

ModelFile tiger() {
  std::istringstream in(kTiger);
  return parse_model(in);
}

}  // namespace

TEST_CASE("tiger belief update after hearing left") {
  const ModelFile f = tiger();
  const BeliefState b = belief_update(f.model, *f.start, 0, 0);
  CHECK(b[0] == doctest::Approx(0.85));
  const BeliefState b2 = belief_update(f.model, b, 0, 0);
  CHECK(b2[0] == doctest::Approx(0.85 * 0.85 / (0.85 * 0.85 + 0.15 * 0.15)));
  CHECK(observation_prob(f.model, *f.start, 0, 0) == doctest::Approx(0.5));
}

TEST_CASE("tiger two-step value by hand") {
  // V1(0.5) = -1 (listen); after one listen the belief 0.85 still prefers
  // listening (-1 > 8.5 - 15), so V2(0.5) = -1 - 0.95.
  const ModelFile f = tiger();
  const BeliefGrid grid = reachable_closure(f.model, *f.start, 2);
  const BeliefValueTable v = value_iteration(f.model, grid, 2);
  CHECK(v.value(*f.start) == doctest::Approx(-1.95).epsilon(1e-12));
  CHECK(greedy_policy(f.model, *f.start, value_iteration(f.model, grid, 1)) == 0);
}

TEST_CASE("closure value iteration equals expectimax on random models") {
  SplitMix64 rng(2024);
  for (int i = 0; i < 12; ++i) {
    const std::size_t states = 2 + i % 2;
    const double gamma = std::array{0.0, 0.5, 0.9}[i % 3];
    const TabularPomdp m = test::random_pomdp(rng, states, 2, 2, gamma);
    const BeliefState start = BeliefState::uniform(states);
    const BeliefValueTable v = value_iteration(m, reachable_closure(m, start, 3), 3);
    CHECK(std::abs(v.value(start) - test::expectimax(m.tables(), start.probabilities(), 3)) <= 1e-9);
  }
}

TEST_CASE("impossible observation is reported") {
  TabularPomdp::Tables t;
  t.states = {"a", "b"};
  t.actions = {"x"};
  t.observations = {"p", "q"};
  t.transition = {{{1, 0}, {0, 1}}};
  t.observation = {{{1, 0}, {1, 0}}};
  t.reward = {{0}, {0}};
  t.discount = 0.5;
  const TabularPomdp m(t);
  CHECK_THROWS_AS(belief_update(m, BeliefState::uniform(2), 0, 1), ImpossibleObservation);
}

TEST_CASE("belief updates stay normalised") {
  SplitMix64 rng(8);
  const TabularPomdp m = test::random_pomdp(rng, 3, 2, 2, 0.9);
  const BeliefGrid g = reachable_closure(m, BeliefState::uniform(3), 4);
  for (const auto& b : g.points) {
    const auto& p = b.probabilities();
    CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) <= 1e-12);
  }
}

TEST_CASE("value iteration contracts by gamma after the first sweep") {
  SplitMix64 rng(31);
  const TabularPomdp m = test::random_pomdp(rng, 2, 2, 2, 0.9);
  const BeliefGrid grid = simplex_grid(2, 20);
  double previous_gap = -1.0;
  BeliefValueTable prev = value_iteration(m, grid, 1);
  for (int n = 2; n <= 8; ++n) {
    const BeliefValueTable cur = value_iteration(m, grid, n);
    double gap = 0.0;
    for (std::size_t i = 0; i < grid.points.size(); ++i) gap = std::max(gap, std::abs(*cur.values()[i] - *prev.values()[i]));
    if (previous_gap > 0.0) CHECK(gap <= (0.9 + 1e-9) * previous_gap + 1e-12);
    previous_gap = gap;
    prev = cur;
  }
}

TEST_CASE("simplex grid interpolation reproduces grid points and is linear") {
  const BeliefGrid g = simplex_grid(3, 4);
  CHECK(g.points.size() == 15);
  const auto w = simplex_interpolation(g, BeliefState({0.3, 0.3, 0.4}));
  double sum = 0.0;
  for (const auto& [i, weight] : w) {
    CHECK(weight >= -1e-12);
    sum += weight;
  }
  CHECK(sum == doctest::Approx(1.0));
}

TEST_CASE("closure table refuses off-grid beliefs") {
  const ModelFile f = tiger();
  const BeliefValueTable v = value_iteration(f.model, reachable_closure(f.model, *f.start, 1), 1);
  CHECK_THROWS_AS(v.value(BeliefState({0.3, 0.7})), UnreachableBelief);
}

TEST_CASE("scaling rewards scales values") {
  const ModelFile f = tiger();
  const BeliefGrid g = reachable_closure(f.model, *f.start, 3);
  const double base = value_iteration(f.model, g, 3).value(*f.start);
  const double scaled = value_iteration(f.model.with_scaled_rewards(2.0), g, 3).value(*f.start);
  CHECK(scaled == doctest::Approx(2.0 * base));
}

TEST_CASE("model file round trip and errors") {
  const ModelFile f = tiger();
  std::istringstream again(format_model(f.model));
  const ModelFile g = parse_model(again);
  CHECK(g.model.tables().transition == f.model.tables().transition);
  CHECK(g.model.tables().reward == f.model.tables().reward);

  std::string broken = kTiger;
  broken.replace(broken.find("0.85 0.15"), 9, "0.85 0.25");
  std::istringstream in(broken);
  CHECK_THROWS(parse_model(in));

  std::istringstream bad_number("discount: abc\n");
  try {
    parse_model(bad_number);
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
  }
}

TEST_CASE("belief state validation") {
  CHECK_THROWS_AS(BeliefState({0.5, 0.6}), ContractViolation);
  CHECK_THROWS_AS(BeliefState({-0.1, 1.1}), ContractViolation);
}
