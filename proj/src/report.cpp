#include "tddm/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "tddm/config.hpp"

namespace tddm::report {

namespace {

using config::format_double;

[[noreturn]] void data_error(const std::string& what) { throw Error(ErrorCategory::data, what); }

double to_double(const std::string& s) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || s.empty()) data_error("CSV cell '" + s + "' is not a number");
  return v;
}

std::string optional_text(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

const std::vector<std::string> kIntervalHeader = {"interval", "first_step", "last_step", "cumulative_return",
                                                  "average_q", "episodes"};
const std::vector<std::string> kEpisodeHeader = {"episode", "end_step", "length", "return"};
const std::vector<std::string> kStepHeader = {"step",  "episode", "action", "reward", "terminal",
                                              "epsilon", "max_q", "loss", "masking_amount"};

std::vector<std::string> benchmark_header() {
  std::vector<std::string> h = {"trial", "seed"};
  for (const auto& n : metrics::column_names()) h.push_back(n);
  h.push_back("bins");
  return h;
}

std::vector<std::string> comparison_header() {
  std::vector<std::string> h = {"environment", "variant"};
  for (const auto& n : metrics::column_names()) h.push_back(n);
  return h;
}

}  // namespace

io::CsvTable intervals_table(const agent::TrainReport& report) {
  io::CsvTable t{kIntervalHeader, {}};
  for (const auto& r : report.intervals) {
    t.rows.push_back({std::to_string(r.index), std::to_string(r.first_step), std::to_string(r.last_step),
                      format_double(r.cumulative_return), format_double(r.average_q), std::to_string(r.episodes)});
  }
  return t;
}

io::CsvTable episodes_table(const agent::TrainReport& report) {
  io::CsvTable t{kEpisodeHeader, {}};
  for (const auto& e : report.episodes) {
    t.rows.push_back({std::to_string(e.episode), std::to_string(e.end_step), std::to_string(e.length),
                      format_double(e.total_return)});
  }
  return t;
}

io::CsvTable steps_table(const agent::TrainReport& report) {
  io::CsvTable t{kStepHeader, {}};
  t.rows.reserve(report.steps.size());
  for (const auto& s : report.steps) {
    t.rows.push_back({std::to_string(s.step), std::to_string(s.episode), std::to_string(s.action),
                      format_double(s.reward), s.terminal ? "1" : "0", format_double(s.epsilon),
                      format_double(s.max_q), optional_text(s.loss), optional_text(s.masking_amount)});
  }
  return t;
}

io::CsvTable benchmark_table(const metrics::BenchmarkRecord& record, const std::vector<std::uint64_t>& seeds) {
  if (seeds.size() != record.trials.size()) {
    throw ContractViolation("benchmark_table: one seed per trial required");
  }
  io::CsvTable t{benchmark_header(), {}};
  auto row = [&](const std::string& trial, const std::string& seed, const metrics::Columns& c) {
    std::vector<std::string> r = {trial, seed};
    for (double v : c.values()) r.push_back(format_double(v));
    r.push_back(std::to_string(record.bins));
    t.rows.push_back(std::move(r));
  };
  for (std::size_t i = 0; i < record.trials.size(); ++i) {
    row(std::to_string(i), std::to_string(seeds[i]), record.trials[i]);
  }
  row("mean", "", record.aggregate);
  return t;
}

metrics::BenchmarkRecord read_benchmark(const io::CsvTable& table) {
  if (table.header != benchmark_header()) data_error("not a benchmark table (unexpected header)");
  metrics::BenchmarkRecord record;
  bool have_mean = false;
  for (const auto& r : table.rows) {
    std::array<double, 10> v{};
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = to_double(r[k + 2]);
    const metrics::Columns c = metrics::Columns::from_values(v);
    record.bins = static_cast<int>(to_double(r.back()));
    if (r[0] == "mean") {
      record.aggregate = c;
      have_mean = true;
    } else {
      record.trials.push_back(c);
    }
  }
  if (!have_mean) data_error("benchmark table has no mean row");
  return record;
}

bool higher_is_better(std::size_t column) { return metrics::column_names().at(column) != "ST.D.R"; }

io::CsvTable comparison_table(const std::vector<ComparisonEntry>& entries) {
  io::CsvTable t{comparison_header(), {}};
  std::array<int, 10> tddm_wins{};
  std::array<int, 10> bench_wins{};
  auto values_row = [&](const std::string& env, const std::string& variant, const metrics::Columns& c) {
    std::vector<std::string> r = {env, variant};
    for (double v : c.values()) r.push_back(format_double(v));
    t.rows.push_back(std::move(r));
  };
  for (const auto& e : entries) {
    values_row(e.environment, "TDDM", e.tddm);
    values_row(e.environment, "Benchmark", e.benchmark);
    std::vector<std::string> best = {e.environment, "best"};
    const auto a = e.tddm.values();
    const auto b = e.benchmark.values();
    for (std::size_t k = 0; k < a.size(); ++k) {
      const bool up = higher_is_better(k);
      if (a[k] == b[k]) {
        best.push_back("tie");
      } else if ((a[k] > b[k]) == up) {
        best.push_back("TDDM");
        ++tddm_wins[k];
      } else {
        best.push_back("Benchmark");
        ++bench_wins[k];
      }
    }
    t.rows.push_back(std::move(best));
  }
  std::vector<std::string> tddm_row = {"all", "#TDDM"};
  std::vector<std::string> bench_row = {"all", "#Benchmark"};
  for (std::size_t k = 0; k < tddm_wins.size(); ++k) {
    tddm_row.push_back(std::to_string(tddm_wins[k]));
    bench_row.push_back(std::to_string(bench_wins[k]));
  }
  t.rows.push_back(std::move(tddm_row));
  t.rows.push_back(std::move(bench_row));
  return t;
}

std::string describe(const io::CsvTable& table) {
  std::ostringstream out;
  if (table.header == benchmark_header()) {
    const metrics::BenchmarkRecord record = read_benchmark(table);
    if (record.trials.empty()) data_error("benchmark table has no trial rows");
    out << "benchmark: " << record.trials.size() << " trial(s), " << record.bins << " entropy bins\n";
    const auto names = metrics::column_names();
    const auto agg = record.aggregate.values();
    for (std::size_t k = 0; k < names.size(); ++k) {
      std::vector<double> column;
      for (const auto& trial : record.trials) column.push_back(trial.values()[k]);
      std::sort(column.begin(), column.end());
      const double recomputed = metrics::mean(column);
      const bool ok = recomputed == agg[k] ||
                      std::abs(recomputed - agg[k]) <= 1e-12 * std::max(1.0, std::abs(agg[k]));
      out << "  " << names[k] << " = " << format_double(agg[k]) << (ok ? "" : "  (MISMATCH: trials give " +
                                                                                 format_double(recomputed) + ")")
          << '\n';
      if (!ok) data_error(out.str() + "mean row does not match the trial rows");
    }
    return out.str();
  }
  if (table.header == comparison_header()) {
    out << "comparison: " << table.rows.size() << " row(s)\n";
    for (const auto& r : table.rows) {
      if (r[1] != "#TDDM" && r[1] != "#Benchmark") continue;
      out << "  " << r[1] << ':';
      for (std::size_t k = 2; k < r.size(); ++k) out << ' ' << table.header[k] << '=' << r[k];
      out << '\n';
    }
    return out.str();
  }
  if (table.header == kIntervalHeader) {
    out << "training intervals: " << table.rows.size() << " row(s)\n";
    for (const auto& r : table.rows) {
      out << "  interval " << r[0] << " steps " << r[1] << "-" << r[2] << ": return " << r[3] << ", avg Q "
          << r[4] << ", episodes " << r[5] << '\n';
    }
    return out.str();
  }
  if (table.header == kEpisodeHeader) {
    double sum = 0.0;
    for (const auto& r : table.rows) sum += to_double(r[3]);
    out << "episodes: " << table.rows.size() << ", total return " << format_double(sum) << '\n';
    return out.str();
  }
  if (table.header == kStepHeader) {
    std::size_t updates = 0;
    for (const auto& r : table.rows) updates += r[7].empty() ? 0 : 1;
    out << "step log: " << table.rows.size() << " step(s), " << updates << " optimizer update(s)\n";
    return out.str();
  }
  data_error("unrecognised CSV header");
}

}  // namespace tddm::report
