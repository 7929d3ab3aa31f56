#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tddm/agent.hpp"
#include "tddm/io.hpp"
#include "tddm/metrics.hpp"

namespace tddm::report {

io::CsvTable intervals_table(const agent::TrainReport& report);
io::CsvTable episodes_table(const agent::TrainReport& report);
io::CsvTable steps_table(const agent::TrainReport& report);

/// One row per trial (with its seed) followed by a "mean" row; the bins
/// column records the entropy histogram size.
io::CsvTable benchmark_table(const metrics::BenchmarkRecord& record, const std::vector<std::uint64_t>& seeds);
/// Inverse of benchmark_table. Throws Error(data) when a cell does not parse.
metrics::BenchmarkRecord read_benchmark(const io::CsvTable& table);

/// Whether a larger value of column k counts as better when flagging best
/// values. Only ST.D.R prefers the smaller value.
bool higher_is_better(std::size_t column);

struct ComparisonEntry {
  std::string environment;
  metrics::Columns tddm;
  metrics::Columns benchmark;
};

/// Per environment: the TDDM and Benchmark rows, then a "best" row naming
/// the winner of each column (TDDM, Benchmark or tie). Two closing rows
/// count the wins of each variant per column.
io::CsvTable comparison_table(const std::vector<ComparisonEntry>& entries);

/// Identifies a CSV written by this tool from its header and returns a
/// short human-readable summary. Benchmark tables are also checked: the
/// mean row must equal the mean of the trial rows.
std::string describe(const io::CsvTable& table);

}  // namespace tddm::report
