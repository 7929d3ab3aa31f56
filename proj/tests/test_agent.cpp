#include <doctest.h>

#include <array>
#include <cmath>

#include "tddm/agent.hpp"
#include "tddm/mask.hpp"

using namespace tddm;
using namespace tddm::agent;

namespace {

// Small, fast configuration exercising every part of the loop.
TrainConfig small_config() {
  TrainConfig c;
  c.net.input_height = c.net.input_width = 24;
  c.net.lstm_units = 8;
  c.net.unroll_length = 3;
  c.total_steps = 300;
  c.warmup_steps = 100;
  c.epsilon_decay_start = 100;
  c.epsilon_decay_end = 200;
  c.batch_size = 4;
  c.replay_capacity = 200;
  c.target_sync_interval = 50;
  c.train_interval = 2;
  c.report_intervals = 3;
  c.seed = 17;
  return c;
}

}  // namespace

TEST_CASE("epsilon schedule") {
  TrainConfig c;
  CHECK(epsilon_at(0, c) == 1.0);
  CHECK(epsilon_at(c.epsilon_decay_end, c) == 0.01);
  CHECK(epsilon_at(c.epsilon_decay_end + 12345, c) == 0.01);
  CHECK(epsilon_at((c.epsilon_decay_start + c.epsilon_decay_end) / 2, c) == doctest::Approx(0.505).epsilon(1e-12));
  CHECK_THROWS_AS(epsilon_at(-1, c), ContractViolation);
}

TEST_CASE("td targets") {
  const std::array<double, 2> q{0.2, 0.5};
  CHECK(td_target(-1.0, true, {}, 0.99) == -1.0);
  CHECK(td_target(0.3, false, q, 0.0) == 0.3);
  CHECK(td_target(1.0, false, q, 0.99) == doctest::Approx(1.495).epsilon(1e-15));
  CHECK_THROWS_AS(td_target(1.0, false, {}, 0.99), ContractViolation);
}

TEST_CASE("config validation lists every problem") {
  TrainConfig c = small_config();
  c.gamma = 1.0;
  c.batch_size = 0;
  try {
    c.validate();
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    const std::string w = e.what();
    CHECK(w.find("gamma") != std::string::npos);
    CHECK(w.find("batch_size") != std::string::npos);
  }
}

TEST_CASE("no optimizer steps when total equals warmup") {
  TrainConfig c = small_config();
  c.total_steps = c.warmup_steps = 60;
  const TrainResult r = train(c);
  CHECK(r.report.optimizer_steps == 0);
  SplitMix64 root(c.seed);
  root.split();
  root.split();
  root.split();
  SplitMix64 init = root.split();
  CHECK(r.params == net::NetworkParams::random(c.net, init));
  for (const auto& s : r.report.steps) CHECK_FALSE(s.loss.has_value());
}

TEST_CASE("training is deterministic and internally consistent") {
  const TrainConfig c = small_config();
  const TrainResult a = train(c);
  const TrainResult b = train(c);
  CHECK(a.params == b.params);
  CHECK(a.report.steps.size() == b.report.steps.size());
  for (std::size_t i = 0; i < a.report.steps.size(); ++i) {
    CHECK(a.report.steps[i].max_q == b.report.steps[i].max_q);
    CHECK(a.report.steps[i].loss == b.report.steps[i].loss);
  }
  CHECK(a.report.optimizer_steps == (c.total_steps - c.warmup_steps) / c.train_interval);
  double by_interval = 0.0, by_episode = 0.0;
  std::int64_t episodes = 0;
  for (const auto& row : a.report.intervals) {
    by_interval += row.cumulative_return;
    episodes += row.episodes;
  }
  for (const auto& e : a.report.episodes) by_episode += e.total_return;
  CHECK(by_interval == by_episode);
  CHECK(episodes == static_cast<std::int64_t>(a.report.episodes.size()));
  REQUIRE(a.report.intervals.size() == 3);
  CHECK(a.report.intervals[0].first_step == 0);
  CHECK(a.report.intervals[2].last_step == c.total_steps - 1);
  for (std::size_t i = 1; i < 3; ++i) CHECK(a.report.intervals[i].first_step == a.report.intervals[i - 1].last_step + 1);
}

TEST_CASE("flow settings do not matter when masking is off") {
  TrainConfig c = small_config();
  const TrainResult a = train(c);
  c.flow.window_radius = 2;
  c.flow.pyramid_levels = 1;
  c.threshold.floor = 0.5;
  const std::uint64_t before = mask::apply_mask_calls();
  const TrainResult b = train(c);
  CHECK(mask::apply_mask_calls() == before);
  CHECK(a.params == b.params);
}

TEST_CASE("syncing the target every step equals having no target network") {
  TrainConfig c = small_config();
  c.target_sync_interval = 1;
  const TrainResult a = train(c);
  c.target_sync_interval = 0;
  const TrainResult b = train(c);
  CHECK(a.params == b.params);
  c.target_sync_interval = 50;
  CHECK_FALSE(train(c).params == a.params);
}

TEST_CASE("masking filters every stored frame except episode starts") {
  TrainConfig c = small_config();
  c.masking_enabled = true;
  c.total_steps = c.warmup_steps = 60;
  const std::uint64_t before = mask::apply_mask_calls();
  const TrainResult r = train(c);
  std::int64_t masked = 0;
  std::int64_t previous_episode = -1;
  for (const auto& s : r.report.steps) {
    const bool first = s.episode != previous_episode;
    CHECK(s.masking_amount.has_value() == !first);
    if (s.masking_amount) {
      ++masked;
      CHECK(*s.masking_amount >= 0.0);
      CHECK(*s.masking_amount <= 1.0);
    }
    previous_episode = s.episode;
  }
  CHECK(mask::apply_mask_calls() - before >= static_cast<std::uint64_t>(masked));
}

TEST_CASE("evaluation of a zero network") {
  net::NetworkSpec spec;
  spec.input_height = spec.input_width = 24;
  const net::NetworkParams zero(spec);
  EvalOptions o;
  o.epsilon = 0.0;
  o.bins = 16;
  const std::uint64_t before = mask::apply_mask_calls();
  int fed = 0;
  o.network_input_hook = [&](const Frame&) { ++fed; };
  const EvalResult r = evaluate(zero, {}, {1, 2}, 50, o);
  CHECK(mask::apply_mask_calls() == before);
  CHECK(fed == 2 * (50 + 1));
  for (const auto& t : r.traces) {
    for (int a : t.actions) CHECK(a == 0);
  }
  CHECK(r.record.aggregate.hidden_entropy == 0.0);
  CHECK(r.record.aggregate.input_entropy == 0.0);
  CHECK(r.record.aggregate.masking_amount > 0.0);
  CHECK(r.record.trials.size() == 2);
}

TEST_CASE("evaluation is reproducible and checks geometry") {
  net::NetworkSpec spec;
  spec.input_height = spec.input_width = 24;
  spec.lstm_units = 8;
  SplitMix64 rng(4);
  const net::NetworkParams p = net::NetworkParams::random(spec, rng);
  const EvalResult a = evaluate(p, {}, {5, 6}, 60);
  const EvalResult b = evaluate(p, {}, {5, 6}, 60);
  CHECK(a.record == b.record);
  env::EnvSpec big;
  big.frame_size = 32;
  CHECK_THROWS_AS(evaluate(p, big, {1}, 10), ConfigError);
}
