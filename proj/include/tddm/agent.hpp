#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "tddm/env.hpp"
#include "tddm/flow.hpp"
#include "tddm/mask.hpp"
#include "tddm/metrics.hpp"
#include "tddm/net.hpp"

namespace tddm::agent {

struct TrainConfig {
  env::EnvSpec env;
  /// Input dimensions must equal env.frame_size.
  net::NetworkSpec net{.input_height = 24, .input_width = 24};
  flow::FlowParams flow;
  mask::ThresholdPolicy threshold;
  bool masking_enabled = false;
  std::int64_t total_steps = 50000;
  std::int64_t warmup_steps = 2000;
  double epsilon_start = 1.0;
  double epsilon_end = 0.01;
  std::int64_t epsilon_decay_start = 2000;
  std::int64_t epsilon_decay_end = 30000;
  double gamma = 0.99;
  int batch_size = 32;
  std::size_t replay_capacity = 20000;
  /// 0 disables the target network; targets then use the online weights.
  std::int64_t target_sync_interval = 1000;
  /// Environment steps between optimizer steps.
  int train_interval = 4;
  net::RmsPropHyper optimizer;
  /// Number of TrainReport rows; each covers an equal share of the steps.
  int report_intervals = 10;
  std::uint64_t seed = 1;

  /// Throws ConfigError listing every violated invariant.
  void validate() const;
};

/// epsilon_start until decay_start, linear to epsilon_end at decay_end,
/// epsilon_end afterwards.
double epsilon_at(std::int64_t step, const TrainConfig& config);

/// y = r for terminal finals, else r + gamma * max_a successor_q[a].
double td_target(double reward, bool terminal, std::span<const double> successor_q, double gamma);

struct StepLog {
  std::int64_t step = 0;
  std::int64_t episode = 0;
  int action = 0;
  double reward = 0.0;
  bool terminal = false;
  double epsilon = 0.0;
  /// max_a Q of the window the action was chosen from.
  double max_q = 0.0;
  /// Set on steps that ran an optimizer update.
  std::optional<double> loss;
  /// Set when the stored observation was masked.
  std::optional<double> masking_amount;
};

struct EpisodeLog {
  std::int64_t episode = 0;
  /// Global step on which the episode ended.
  std::int64_t end_step = 0;
  int length = 0;
  double total_return = 0.0;
};

struct IntervalRow {
  int index = 0;
  std::int64_t first_step = 0;
  std::int64_t last_step = 0;
  /// Sum of the returns of episodes that ended inside the interval.
  double cumulative_return = 0.0;
  /// Mean of max_a Q over the acting steps of the interval.
  double average_q = 0.0;
  std::int64_t episodes = 0;
};

struct TrainReport {
  std::vector<IntervalRow> intervals;
  std::vector<EpisodeLog> episodes;
  std::vector<StepLog> steps;
  std::int64_t optimizer_steps = 0;

  /// Mean return over the last `count` finished episodes (all of them when
  /// fewer finished).
  double mean_final_return(std::size_t count) const;
};

struct TrainResult {
  net::NetworkParams params;
  TrainReport report;
};

/// Runs the act/store/sample/learn loop. Stored and acted-on observations
/// are TDDM-filtered when masking is enabled (never the first frame of an
/// episode). Each optimizer step samples windows of up to unroll_length
/// frames ending at a uniformly chosen final transition. Throws
/// net::Divergence naming the step on a non-finite loss.
TrainResult train(const TrainConfig& config);

struct EvalOptions {
  double epsilon = 0.01;
  int bins = metrics::kDefaultBins;
  flow::FlowParams flow;
  mask::ThresholdPolicy threshold;
  /// Called with every frame handed to the network.
  std::function<void(const Frame&)> network_input_hook;
};

struct EvalResult {
  metrics::BenchmarkRecord record;
  std::vector<metrics::TrialTrace> traces;
};

/// One act-only trial per seed on unfiltered frames. Masks are computed for
/// the M.A./ST.D.M columns only. Throws ConfigError when the network input
/// does not match the frame size.
EvalResult evaluate(const net::NetworkParams& params, const env::EnvSpec& env_spec,
                    const std::vector<std::uint64_t>& seeds, std::int64_t steps_per_trial,
                    const EvalOptions& options = {});

}  // namespace tddm::agent
