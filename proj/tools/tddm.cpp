// Command-line front end: train, evaluate, compare, pomdp-solve, flow-debug,
// env-dump and report.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <malloc.h>

#include "tddm/agent.hpp"
#include "tddm/config.hpp"
#include "tddm/env.hpp"
#include "tddm/flow.hpp"
#include "tddm/io.hpp"
#include "tddm/mask.hpp"
#include "tddm/net.hpp"
#include "tddm/pomdp.hpp"
#include "tddm/report.hpp"

namespace fs = std::filesystem;
using namespace tddm;

namespace {

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

void write_csv(const std::string& path, const io::CsvTable& table) {
  io::write_file_atomic(path, io::to_csv(table));
}

config::RunConfig load(const std::string& path) {
  return path.empty() ? config::parse_config("") : config::load_config(path);
}

std::vector<std::uint64_t> eval_seeds(const config::RunConfig& c) {
  return {c.eval_seeds.begin(), c.eval_seeds.begin() + c.eval_trials};
}

agent::EvalOptions eval_options(const config::RunConfig& c) {
  agent::EvalOptions o;
  o.epsilon = c.eval_epsilon;
  o.bins = c.entropy_bins;
  o.flow = c.train.flow;
  o.threshold = c.train.threshold;
  return o;
}

// Trains one variant and writes its checkpoint and training tables.
agent::TrainResult run_training(const agent::TrainConfig& tc, const std::string& dir) {
  agent::TrainResult result = agent::train(tc);
  net::save_checkpoint(join(dir, "checkpoint.bin"), result.params);
  write_csv(join(dir, "train_intervals.csv"), report::intervals_table(result.report));
  write_csv(join(dir, "train_episodes.csv"), report::episodes_table(result.report));
  write_csv(join(dir, "train_steps.csv"), report::steps_table(result.report));
  return result;
}

metrics::BenchmarkRecord run_evaluation(const net::NetworkParams& params, const config::RunConfig& c,
                                        const env::EnvSpec& spec, const std::string& dir) {
  const auto seeds = eval_seeds(c);
  const agent::EvalResult r = agent::evaluate(params, spec, seeds, c.eval_steps, eval_options(c));
  write_csv(join(dir, "benchmark.csv"), report::benchmark_table(r.record, seeds));
  return r.record;
}

int cmd_train(const std::string& config_path, const std::string& out, const std::string& masking) {
  config::RunConfig c = load(config_path);
  if (!out.empty()) c.output_dir = out;
  if (masking == "on") c.train.masking_enabled = true;
  if (masking == "off") c.train.masking_enabled = false;
  io::write_file_atomic(join(c.output_dir, "config.ini"), config::format_config(c));
  const agent::TrainResult r = run_training(c.train, c.output_dir);
  std::cout << "trained " << c.train.total_steps << " steps, " << r.report.episodes.size()
            << " episodes, mean return of last 500: " << config::format_double(r.report.mean_final_return(500))
            << "\n";
  return 0;
}

int cmd_evaluate(const std::string& config_path, const std::string& checkpoint, const std::string& out) {
  config::RunConfig c = load(config_path);
  if (!out.empty()) c.output_dir = out;
  const net::NetworkParams params = net::load_checkpoint(checkpoint);
  const metrics::BenchmarkRecord record = run_evaluation(params, c, c.train.env, c.output_dir);
  const auto names = metrics::column_names();
  const auto values = record.aggregate.values();
  for (std::size_t k = 0; k < names.size(); ++k) {
    std::cout << names[k] << " = " << config::format_double(values[k]) << "\n";
  }
  return 0;
}

int cmd_compare(const std::string& config_path, const std::string& out) {
  config::RunConfig c = load(config_path);
  if (!out.empty()) c.output_dir = out;
  io::write_file_atomic(join(c.output_dir, "config.ini"), config::format_config(c));
  io::CsvTable manifest{{"environment", "variant", "trial", "seed", "directory"}, {}};
  std::vector<report::ComparisonEntry> entries;
  for (env::Game game : c.environments) {
    report::ComparisonEntry entry;
    entry.environment = env::to_string(game);
    for (bool masking : {true, false}) {
      const std::string variant = masking ? "tddm" : "benchmark";
      std::vector<metrics::Columns> per_checkpoint;
      for (int trial = 0; trial < c.train_trials; ++trial) {
        agent::TrainConfig tc = c.train;
        tc.env.game = game;
        tc.masking_enabled = masking;
        tc.seed = c.train.seed + static_cast<std::uint64_t>(trial);
        // Relative to the output directory so reruns elsewhere match byte for byte.
        const std::string relative = join(join(entry.environment, variant), "trial" + std::to_string(trial));
        const std::string dir = join(c.output_dir, relative);
        const agent::TrainResult r = run_training(tc, dir);
        per_checkpoint.push_back(run_evaluation(r.params, c, tc.env, dir).aggregate);
        manifest.rows.push_back({entry.environment, variant, std::to_string(trial), std::to_string(tc.seed), relative});
        write_csv(join(c.output_dir, "manifest.csv"), manifest);
        std::cout << entry.environment << " " << variant << " trial " << trial << ": final-500 return "
                  << config::format_double(r.report.mean_final_return(500)) << "\n";
      }
      std::array<double, 10> mean{};
      for (const auto& col : per_checkpoint) {
        const auto v = col.values();
        for (std::size_t k = 0; k < v.size(); ++k) mean[k] += v[k];
      }
      for (double& m : mean) m /= static_cast<double>(per_checkpoint.size());
      (masking ? entry.tddm : entry.benchmark) = metrics::Columns::from_values(mean);
    }
    entries.push_back(entry);
  }
  write_csv(join(c.output_dir, "comparison.csv"), report::comparison_table(entries));
  std::cout << report::describe(report::comparison_table(entries));
  return 0;
}

int cmd_pomdp(const std::string& model_path, int sweeps, int depth, int resolution, const std::string& out) {
  std::ifstream in(model_path);
  if (!in) throw IoError("cannot open model '" + model_path + "'");
  const pomdp::ModelFile file = pomdp::parse_model(in);
  const pomdp::TabularPomdp& m = file.model;
  const pomdp::BeliefState start = file.start ? *file.start : pomdp::BeliefState::uniform(m.num_states());
  const pomdp::BeliefGrid grid = resolution > 0 ? pomdp::simplex_grid(m.num_states(), resolution)
                                                : pomdp::reachable_closure(m, start, depth);
  const pomdp::BeliefValueTable table = pomdp::value_iteration(m, grid, sweeps);
  io::CsvTable csv;
  for (const auto& s : m.tables().states) csv.header.push_back("b(" + s + ")");
  csv.header.push_back("value");
  csv.header.push_back("greedy_action");
  for (std::size_t i = 0; i < grid.points.size(); ++i) {
    std::vector<std::string> row;
    for (double p : grid.points[i].probabilities()) row.push_back(config::format_double(p));
    const auto& v = table.values()[i];
    row.push_back(v ? config::format_double(*v) : "");
    std::string action;
    if (v) {
      try {
        action = m.tables().actions[pomdp::greedy_policy(m, grid.points[i], table)];
      } catch (const pomdp::UnreachableBelief&) {
        // Successor values lie beyond the solved horizon.
      }
    }
    row.push_back(action);
    csv.rows.push_back(std::move(row));
  }
  const std::string text = io::to_csv(csv);
  if (out.empty()) {
    std::cout << text;
  } else {
    io::write_file_atomic(out, text);
  }
  std::cerr << "V(start) = " << config::format_double(table.value(start)) << "\n";
  return 0;
}

int cmd_flow_debug(const std::string& config_path, const std::string& prev_path, const std::string& next_path,
                   int step, std::uint64_t seed, const std::string& out) {
  const config::RunConfig c = load(config_path);
  Frame prev, next;
  if (!prev_path.empty() || !next_path.empty()) {
    if (prev_path.empty() || next_path.empty()) throw ConfigError("--prev and --next must be given together");
    prev = Frame(io::decode_pgm(io::read_file(prev_path)));
    next = Frame(io::decode_pgm(io::read_file(next_path)));
  } else {
    env::Environment e(c.train.env, seed);
    for (int t = 0; t < step; ++t) {
      if (e.terminal()) throw ConfigError("episode ended before step " + std::to_string(step));
      e.step(env::scripted_action(e));
    }
    if (e.terminal()) throw ConfigError("episode ended before step " + std::to_string(step));
    prev = e.observation();
    next = e.step(env::scripted_action(e)).observation;
  }
  const flow::FlowField field = flow::estimate_flow(prev, next, c.train.flow);
  const Plane mag = flow::magnitude(field);
  const mask::TddmResult r = mask::tddm(prev, next, c.train.flow, c.train.threshold);

  std::ostringstream dump;
  dump << "# x y dx dy magnitude kept\n";
  for (int y = 0; y < mag.height(); ++y) {
    for (int x = 0; x < mag.width(); ++x) {
      dump << x << ' ' << y << ' ' << config::format_double(field.dx.at(x, y)) << ' '
           << config::format_double(field.dy.at(x, y)) << ' ' << config::format_double(mag.at(x, y)) << ' '
           << (r.mask.kept(x, y) ? 1 : 0) << '\n';
    }
  }
  io::write_file_atomic(join(out, "flow.txt"), dump.str());
  double peak = 0.0;
  for (double v : mag.values()) peak = std::max(peak, v);
  Plane scaled = mag;
  if (peak > 0.0) {
    for (double& v : scaled.values()) v /= peak;
  }
  io::write_file_atomic(join(out, "magnitude.pgm"), io::encode_pgm(scaled));
  Plane bm(r.mask.width(), r.mask.height());
  for (int y = 0; y < bm.height(); ++y) {
    for (int x = 0; x < bm.width(); ++x) bm.at(x, y) = r.mask.kept(x, y) ? 1.0 : 0.0;
  }
  io::write_file_atomic(join(out, "triptych.pgm"), io::encode_pgm(io::hconcat({next.plane(), bm, r.masked.plane()})));
  std::cout << "masking amount " << config::format_double(r.masking_amount) << ", peak |flow| "
            << config::format_double(peak) << "\n";
  return 0;
}

int cmd_env_dump(const std::string& config_path, std::uint64_t seed, int steps, const std::string& policy,
                 const std::string& out) {
  const config::RunConfig c = load(config_path);
  if (policy != "scripted" && policy != "random") throw ConfigError("--policy must be scripted or random");
  env::Environment e(c.train.env, seed);
  SplitMix64 rng(seed ^ 0x5bd1e995u);
  io::CsvTable log{{"step", "action", "reward", "terminal"}, {}};
  auto frame_name = [](int i) {
    std::ostringstream name;
    name << "frame_" << std::setw(5) << std::setfill('0') << i << ".pgm";
    return name.str();
  };
  io::write_file_atomic(join(out, frame_name(0)), io::encode_pgm(e.observation().plane()));
  for (int t = 0; t < steps && !e.terminal(); ++t) {
    const int a = policy == "scripted" ? env::scripted_action(e) : static_cast<int>(rng.below(env::kNumActions));
    const env::StepResult r = e.step(a);
    io::write_file_atomic(join(out, frame_name(t + 1)), io::encode_pgm(r.observation.plane()));
    log.rows.push_back({std::to_string(t), std::to_string(a), config::format_double(r.reward), r.terminal ? "1" : "0"});
  }
  write_csv(join(out, "episode.csv"), log);
  std::cout << "wrote " << log.rows.size() + 1 << " frames to " << out << "\n";
  return 0;
}

int cmd_report(const std::vector<std::string>& files) {
  for (const auto& f : files) {
    std::cout << f << ":\n" << report::describe(io::parse_csv(io::read_file(f)));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  // Keep training buffers on the heap instead of remapping them every batch.
  mallopt(M_MMAP_THRESHOLD, 64 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
  CLI::App app{"Temporal-difference displacement masking toolkit"};
  app.require_subcommand(1);

  std::string config_path, out, masking = "config", checkpoint, model, prev, next, policy = "scripted";
  int sweeps = 10, depth = 10, resolution = 0, step = 5, steps = 100;
  std::uint64_t seed = 1;
  std::vector<std::string> files;

  auto* train = app.add_subcommand("train", "Train one network and write its checkpoint and logs");
  train->add_option("-c,--config", config_path, "Config file");
  train->add_option("-o,--out", out, "Output directory (overrides [run] output_dir)");
  train->add_option("--masking", masking, "on, off or config")->check(CLI::IsMember({"on", "off", "config"}));

  auto* evaluate = app.add_subcommand("evaluate", "Act-only evaluation of a checkpoint");
  evaluate->add_option("-c,--config", config_path, "Config file");
  evaluate->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  evaluate->add_option("-o,--out", out, "Output directory");

  auto* compare = app.add_subcommand("compare", "Train and evaluate both variants on every environment");
  compare->add_option("-c,--config", config_path, "Config file");
  compare->add_option("-o,--out", out, "Output directory");

  auto* solve = app.add_subcommand("pomdp-solve", "Value iteration on a belief grid");
  solve->add_option("--model", model, "Model file")->required();
  solve->add_option("--sweeps", sweeps, "Value-iteration sweeps")->check(CLI::NonNegativeNumber);
  solve->add_option("--depth", depth, "Closure depth for the reachable-belief grid")->check(CLI::NonNegativeNumber);
  solve->add_option("--resolution", resolution, "Use a simplex grid with this resolution instead")
      ->check(CLI::NonNegativeNumber);
  solve->add_option("-o,--out", out, "CSV output file (stdout when omitted)");

  auto* flowdbg = app.add_subcommand("flow-debug", "Dump flow, magnitude and mask for a frame pair");
  flowdbg->add_option("-c,--config", config_path, "Config file (env, flow and mask settings)");
  flowdbg->add_option("--prev", prev, "First frame (PGM)");
  flowdbg->add_option("--next", next, "Second frame (PGM)");
  flowdbg->add_option("--step", step, "Without frames: use env steps (step, step+1)")->check(CLI::NonNegativeNumber);
  flowdbg->add_option("--seed", seed, "Environment seed");
  flowdbg->add_option("-o,--out", out, "Output directory")->required();

  auto* dump = app.add_subcommand("env-dump", "Write one episode as PGM frames and a CSV log");
  dump->add_option("-c,--config", config_path, "Config file (env settings)");
  dump->add_option("--seed", seed, "Environment seed");
  dump->add_option("--steps", steps, "Maximum steps")->check(CLI::NonNegativeNumber);
  dump->add_option("--policy", policy, "scripted or random");
  dump->add_option("-o,--out", out, "Output directory")->required();

  auto* rep = app.add_subcommand("report", "Summarise and check CSV files written by this tool");
  rep->add_option("files", files, "CSV files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ErrorCategory::config);
  }

  try {
    if (*train) return cmd_train(config_path, out, masking);
    if (*evaluate) return cmd_evaluate(config_path, checkpoint, out);
    if (*compare) return cmd_compare(config_path, out);
    if (*solve) return cmd_pomdp(model, sweeps, depth, resolution, out);
    if (*flowdbg) return cmd_flow_debug(config_path, prev, next, step, seed, out);
    if (*dump) return cmd_env_dump(config_path, seed, steps, policy, out);
    if (*rep) return cmd_report(files);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
