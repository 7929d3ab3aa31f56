#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "tddm/common.hpp"

namespace tddm::metrics {

inline constexpr int kDefaultBins = 64;

/// Entropy in bits of the histogram of `values` over `bins` equal-width bins
/// spanning [min, max]; a constant collection has zero entropy. Throws
/// ContractViolation for an empty collection, fewer than 2 bins or
/// non-finite values.
double shannon_entropy_bits(std::span<const double> values, int bins = kDefaultBins);

/// Fraction of entries that are not exactly zero.
double sparsity(std::span<const double> values);

/// Population mean and standard deviation; both zero for an empty input.
double mean(std::span<const double> values);
double population_std(std::span<const double> values);

/// What one evaluation trial recorded.
struct TrialTrace {
  /// LSTM hidden state after each step.
  std::vector<std::vector<double>> hidden_states;
  /// LSTM input features at each step.
  std::vector<std::vector<double>> features;
  /// Returns of episodes that finished inside the trial.
  std::vector<double> episode_returns;
  /// Return accumulated by the episode still running when the trial ended.
  double unfinished_return = 0.0;
  std::vector<int> actions;
  /// Masking amount of every frame that has a predecessor in its episode.
  std::vector<double> masking_amounts;
};

/// One row of per-trial evaluation statistics.
struct Columns {
  double average_return = 0.0;           // A.R.
  double episodes = 0.0;                 // N.P.E.
  double hidden_entropy = 0.0;           // H.S.A.E.
  double input_entropy = 0.0;            // S.A.E.
  double hidden_sparsity = 0.0;          // H.S.S.
  double masking_amount = 0.0;           // M.A.
  double input_sparsity = 0.0;           // S.S.
  double return_std = 0.0;               // ST.D.R
  double action_std = 0.0;               // ST.D.A
  double masking_std = 0.0;              // ST.D.M

  std::array<double, 10> values() const;
  static Columns from_values(const std::array<double, 10>& v);
  friend bool operator==(const Columns&, const Columns&) = default;
};

/// Header names in the order of Columns::values().
const std::array<std::string, 10>& column_names();

struct BenchmarkRecord {
  std::vector<Columns> trials;
  /// Arithmetic mean of the per-trial rows.
  Columns aggregate;
  int bins = kDefaultBins;
  friend bool operator==(const BenchmarkRecord&, const BenchmarkRecord&) = default;
};

/// Per-trial columns for one trace. A.R. is the mean return of the finished
/// episodes, or the unfinished return when none finished; N.P.E. counts
/// finished episodes. Standard deviations are population values over the
/// samples inside the trial. Throws ContractViolation when vector widths
/// differ within a trace.
Columns trial_columns(const TrialTrace& trace, int bins = kDefaultBins);

/// Per-trial columns and their mean. Throws ContractViolation for no
/// trials or inconsistent widths.
BenchmarkRecord summarize(const std::vector<TrialTrace>& trials, int bins = kDefaultBins);

}  // namespace tddm::metrics
