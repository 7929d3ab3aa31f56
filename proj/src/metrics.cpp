#include "tddm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tddm::metrics {

namespace {

std::vector<double> flatten(const std::vector<std::vector<double>>& rows, const char* what) {
  std::vector<double> out;
  if (rows.empty()) return out;
  const std::size_t width = rows.front().size();
  out.reserve(rows.size() * width);
  for (const auto& r : rows) {
    if (r.size() != width) throw ContractViolation(std::string("inconsistent ") + what + " widths in trace");
    out.insert(out.end(), r.begin(), r.end());
  }
  return out;
}

}  // namespace

double shannon_entropy_bits(std::span<const double> values, int bins) {
  if (values.empty()) throw ContractViolation("entropy of an empty collection");
  if (bins < 2) throw ContractViolation("entropy needs at least 2 bins");
  double lo = values[0];
  double hi = values[0];
  for (double v : values) {
    if (!std::isfinite(v)) throw ContractViolation("entropy of a non-finite value");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (lo == hi) return 0.0;
  std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
  const double width = hi - lo;
  for (double v : values) {
    const auto b = static_cast<int>((v - lo) / width * bins);
    ++counts[static_cast<std::size_t>(std::clamp(b, 0, bins - 1))];
  }
  const double n = static_cast<double>(values.size());
  double h = 0.0;
  for (std::size_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log2(p);
  }
  return h;
}

double sparsity(std::span<const double> values) {
  if (values.empty()) throw ContractViolation("sparsity of an empty collection");
  const auto nonzero = std::count_if(values.begin(), values.end(), [](double v) { return v != 0.0; });
  return static_cast<double>(nonzero) / static_cast<double>(values.size());
}

double mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double population_std(std::span<const double> values) {
  if (values.empty()) return 0.0;
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size()));
}

std::array<double, 10> Columns::values() const {
  return {average_return, episodes,       hidden_entropy, input_entropy, hidden_sparsity,
          masking_amount, input_sparsity, return_std,     action_std,    masking_std};
}

Columns Columns::from_values(const std::array<double, 10>& v) {
  return {v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9]};
}

const std::array<std::string, 10>& column_names() {
  static const std::array<std::string, 10> names = {
      "A.R.", "N.P.E.", "H.S.A.E.", "S.A.E.", "H.S.S.", "M.A.", "S.S.", "ST.D.R", "ST.D.A", "ST.D.M"};
  return names;
}

Columns trial_columns(const TrialTrace& trace, int bins) {
  Columns c;
  const std::vector<double> returns =
      trace.episode_returns.empty() ? std::vector<double>{trace.unfinished_return} : trace.episode_returns;
  c.average_return = mean(returns);
  c.return_std = population_std(returns);
  c.episodes = static_cast<double>(trace.episode_returns.size());

  const std::vector<double> hidden = flatten(trace.hidden_states, "hidden-state");
  const std::vector<double> features = flatten(trace.features, "feature");
  if (!hidden.empty()) {
    c.hidden_entropy = shannon_entropy_bits(hidden, bins);
    c.hidden_sparsity = sparsity(hidden);
  }
  if (!features.empty()) {
    c.input_entropy = shannon_entropy_bits(features, bins);
    c.input_sparsity = sparsity(features);
  }

  std::vector<double> actions(trace.actions.begin(), trace.actions.end());
  c.action_std = population_std(actions);
  c.masking_amount = mean(trace.masking_amounts);
  c.masking_std = population_std(trace.masking_amounts);
  return c;
}

BenchmarkRecord summarize(const std::vector<TrialTrace>& trials, int bins) {
  if (trials.empty()) throw ContractViolation("summarize needs at least one trial");
  BenchmarkRecord record;
  record.bins = bins;
  std::size_t hidden_width = 0;
  std::size_t feature_width = 0;
  std::array<std::vector<double>, 10> columns;
  for (const TrialTrace& t : trials) {
    if (!t.hidden_states.empty()) {
      if (hidden_width == 0) hidden_width = t.hidden_states.front().size();
      if (t.hidden_states.front().size() != hidden_width) {
        throw ContractViolation("inconsistent hidden-state widths across trials");
      }
    }
    if (!t.features.empty()) {
      if (feature_width == 0) feature_width = t.features.front().size();
      if (t.features.front().size() != feature_width) {
        throw ContractViolation("inconsistent feature widths across trials");
      }
    }
    record.trials.push_back(trial_columns(t, bins));
    const auto v = record.trials.back().values();
    for (std::size_t k = 0; k < v.size(); ++k) columns[k].push_back(v[k]);
  }
  // Summing in sorted order makes the mean independent of trial order.
  std::array<double, 10> means{};
  for (std::size_t k = 0; k < columns.size(); ++k) {
    std::sort(columns[k].begin(), columns[k].end());
    means[k] = mean(columns[k]);
  }
  record.aggregate = Columns::from_values(means);
  return record;
}

}  // namespace tddm::metrics
