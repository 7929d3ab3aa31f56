#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tddm/agent.hpp"

namespace tddm::config {

/// Everything a train/evaluate/compare run needs.
struct RunConfig {
  agent::TrainConfig train;
  std::string output_dir = "out";
  /// Games compared side by side; each uses the [env] settings.
  std::vector<env::Game> environments{env::Game::catch_};
  /// Training trials per variant; trial i trains with seed train.seed + i.
  int train_trials = 1;
  /// Seeds fixed in advance for act-only evaluation.
  std::vector<std::uint64_t> eval_seeds{11, 23, 37, 41, 53, 67, 79, 83, 97, 101};
  /// Evaluation trials per checkpoint; uses the first eval_trials seeds.
  int eval_trials = 10;
  std::int64_t eval_steps = 1000;
  double eval_epsilon = 0.01;
  int entropy_bins = metrics::kDefaultBins;
};

/// Parses the sectioned key = value format described in the README. Every
/// problem found (unknown section or key, bad value, duplicate key,
/// violated invariant) is collected; a ConfigError listing them all, each
/// with its line number, is thrown when there is at least one.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Canonical text form; parse_config(format_config(c)) reproduces c.
std::string format_config(const RunConfig& config);

/// Shortest decimal string that parses back to the same double.
std::string format_double(double value);

}  // namespace tddm::config
