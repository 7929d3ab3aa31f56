// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance --cli <path to tddm> --work <scratch dir> [--only 1,3,...]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include <malloc.h>
#include <sys/wait.h>

#include "helpers.hpp"
#include "net_oracle.hpp"
#include "pomdp_oracle.hpp"
#include "tddm/agent.hpp"
#include "tddm/config.hpp"
#include "tddm/env.hpp"
#include "tddm/flow.hpp"
#include "tddm/io.hpp"
#include "tddm/mask.hpp"
#include "tddm/metrics.hpp"
#include "tddm/net.hpp"
#include "tddm/pomdp.hpp"

namespace fs = std::filesystem;
using namespace tddm;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Paths {
  std::string cli;
  fs::path work;
};

// 1. Flow accuracy on known integer shifts, zero-shift exactness, runtime.
Outcome flow_accuracy(const Paths&) {
  constexpr int kSize = 64;
  constexpr int kMargin = 8;
  const flow::FlowParams params;
  SplitMix64 rng(101);
  double worst_pair = 0.0, total = 0.0, zero_peak = 0.0;
  int pairs = 0;
  for (int texture = 0; texture < 20; ++texture) {
    const Plane base = test::smooth_texture(kSize, kSize, rng, 4 + texture % 5);
    for (int dy = -3; dy <= 3; ++dy) {
      for (int dx = -3; dx <= 3; ++dx) {
        const flow::FlowField f = flow::estimate_flow(Frame(base), Frame(test::shifted(base, dx, dy)), params);
        if (dx == 0 && dy == 0) {
          for (double v : flow::magnitude(f).values()) zero_peak = std::max(zero_peak, v);
          continue;
        }
        double err = 0.0;
        int n = 0;
        for (int y = kMargin; y < kSize - kMargin; ++y) {
          for (int x = kMargin; x < kSize - kMargin; ++x) {
            err += std::hypot(f.dx.at(x, y) - dx, f.dy.at(x, y) - dy);
            ++n;
          }
        }
        worst_pair = std::max(worst_pair, err / n);
        total += err / n;
        ++pairs;
      }
    }
  }
  const double mean_epe = total / pairs;

  SplitMix64 trng(7);
  constexpr int kTimed = 20;
  std::vector<std::pair<Frame, Frame>> timed;
  for (int i = 0; i < kTimed; ++i) {
    const Plane b = test::smooth_texture(84, 84, trng);
    timed.emplace_back(Frame(b), Frame(test::shifted(b, 2, -1)));
  }
  flow::estimate_flow(timed[0].first, timed[0].second, params);
  const auto t0 = Clock::now();
  for (const auto& [a, b] : timed) flow::estimate_flow(a, b, params);
  const double ms = 1000.0 * seconds_since(t0) / kTimed;

  const bool pass = mean_epe <= 0.5 && worst_pair <= 0.5 && zero_peak <= 1e-6 && ms <= 50.0;
  return {pass, "mean EPE " + fmt(mean_epe) + " px (worst pair " + fmt(worst_pair) + ", limit 0.5); zero-shift max |flow| " +
                    fmt(zero_peak) + " (limit 1e-6); " + fmt(ms, 3) + " ms per 84x84 pair (limit 50)"};
}

// 2. Polynomial expansion against dense weighted least squares.
Outcome expansion_oracle(const Paths&) {
  const double sigma = flow::FlowParams{}.expansion_sigma;
  const int r = flow::expansion_radius(sigma);
  SplitMix64 rng(202);
  double worst = 0.0;
  for (int frame = 0; frame < 50; ++frame) {
    const Plane img = test::random_plane(16, 16, rng);
    const flow::PolyCoeffs poly = flow::polynomial_expansion(img, sigma, r);
    for (int cy = r; cy < 16 - r; ++cy) {
      for (int cx = r; cx < 16 - r; ++cx) {
        const int n = (2 * r + 1) * (2 * r + 1);
        Eigen::MatrixXd a(n, 6);
        Eigen::VectorXd f(n);
        int row = 0;
        for (int y = -r; y <= r; ++y) {
          for (int x = -r; x <= r; ++x) {
            const double s = std::sqrt(std::exp(-(x * x + y * y) / (2.0 * sigma * sigma)));
            a.row(row) << s, s * x, s * y, s * x * x, s * y * y, s * x * y;
            f(row) = s * img.at(cx + x, cy + y);
            ++row;
          }
        }
        const Eigen::VectorXd c = a.colPivHouseholderQr().solve(f);
        const flow::PixelPoly& p = poly.at(cx, cy);
        worst = std::max({worst, std::abs(p.c - c(0)), std::abs(p.bx - c(1)), std::abs(p.by - c(2)),
                          std::abs(p.axx - c(3)), std::abs(p.ayy - c(4)), std::abs(p.axy - 0.5 * c(5))});
      }
    }
  }
  return {worst <= 1e-6, "max coefficient difference " + fmt(worst) + " over 50 frames (limit 1e-6)"};
}

// 3. End-to-end gradient check against central differences.
Outcome gradient_check(const Paths&) {
  net::NetworkSpec spec;
  spec.input_height = spec.input_width = 24;
  spec.lstm_units = 8;
  spec.unroll_length = 4;
  const std::size_t count = spec.parameter_count();
  constexpr double kStep = 1e-5;
  const std::size_t conv_params = [&] {
    std::size_t n = 0;
    int in = 1;
    for (const auto& l : spec.conv) {
      n += static_cast<std::size_t>(l.out_channels) * (in * l.kernel * l.kernel + 1);
      in = l.out_channels;
    }
    return n;
  }();

  const auto t0 = Clock::now();
  SplitMix64 rng(303);
  double worst = 0.0;
  int accepted = 0, redrawn = 0;
  while (accepted < 10) {
    const net::NetworkParams p = net::NetworkParams::random(spec, rng);
    std::vector<Frame> frames;
    for (int i = 0; i < 5; ++i) frames.push_back(test::sparse_frame(24, rng));
    net::Batch batch;
    batch.sequences = {{&frames[0], &frames[1], &frames[2]}, {&frames[3], &frames[4]}};
    batch.actions = {static_cast<int>(rng.below(3)), static_cast<int>(rng.below(3))};
    batch.targets = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    std::vector<const Frame*> all;
    for (const auto& f : frames) all.push_back(&f);

    bool kink = false;
    for (std::size_t k = 0; k < conv_params && !kink; ++k) kink = test::crosses_kink(p, all, k, kStep);
    if (kink) {
      ++redrawn;
      continue;
    }
    const net::NetworkParams g = net::loss_and_gradient(p, batch).grads;
    for (std::size_t k = 0; k < count; ++k) {
      worst = std::max(worst, test::relative_error(g.values()[k], test::fd_derivative(p, batch, k, kStep)));
    }
    ++accepted;
  }
  const double secs = seconds_since(t0);
  const bool pass = count <= 10000 && worst < 1e-4 && secs <= 60.0;
  return {pass, std::to_string(count) + " parameters, max relative error " + fmt(worst) + " (limit 1e-4) over 10 draws (" +
                    std::to_string(redrawn) + " redrawn for ReLU kinks inside the stencil), " + fmt(secs, 3) +
                    " s (limit 60)"};
}

// 4. Closure value iteration equals brute-force expectimax.
Outcome pomdp_equivalence(const Paths&) {
  SplitMix64 rng(404);
  double worst = 0.0, worst_sum = 0.0;
  const std::array<double, 3> gammas{0.0, 0.5, 0.9};
  for (int i = 0; i < 25; ++i) {
    const std::size_t states = 2 + rng.below(2);
    const pomdp::TabularPomdp m = test::random_pomdp(rng, states, 2, 2, gammas[static_cast<std::size_t>(i) % 3]);
    std::vector<double> b0(states);
    for (double& v : b0) v = rng.uniform(0.05, 1.0);
    const double s = std::accumulate(b0.begin(), b0.end(), 0.0);
    for (double& v : b0) v /= s;
    const pomdp::BeliefState start(b0);
    const pomdp::BeliefGrid grid = pomdp::reachable_closure(m, start, 3);
    const pomdp::BeliefValueTable v = pomdp::value_iteration(m, grid, 3);
    worst = std::max(worst, std::abs(v.value(start) - test::expectimax(m.tables(), start.probabilities(), 3)));
    for (const auto& b : grid.points) {
      const auto& p = b.probabilities();
      worst_sum = std::max(worst_sum, std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0));
      for (std::size_t a = 0; a < m.num_actions(); ++a) {
        for (std::size_t o = 0; o < m.num_observations(); ++o) {
          if (pomdp::observation_prob(m, b, a, o) <= 0.0) continue;
          const std::vector<double> q = pomdp::belief_update(m, b, a, o).probabilities();
          worst_sum = std::max(worst_sum, std::abs(std::accumulate(q.begin(), q.end(), 0.0) - 1.0));
        }
      }
    }
  }
  return {worst <= 1e-9 && worst_sum <= 1e-12, "max |VI - expectimax| " + fmt(worst) +
                                                   " (limit 1e-9); max |sum(b) - 1| " + fmt(worst_sum) + " (limit 1e-12)"};
}

int run_cli(const Paths& paths, const std::string& args, const fs::path& log) {
  const std::string cmd = "\"" + paths.cli + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return status == -1 ? -1 : WEXITSTATUS(status);
}

std::vector<double> episode_returns(const fs::path& csv) {
  const io::CsvTable t = io::parse_csv(io::read_file(csv.string()));
  const std::size_t col = t.column("return");
  std::vector<double> out;
  for (const auto& r : t.rows) out.push_back(std::stod(r[col]));
  return out;
}

// 5. Learning regression through the compare command.
Outcome learning(const Paths& paths) {
  const fs::path dir = paths.work / "learning";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string cfg = R"([env]
game = catch
frame_size = 24

[run]
environments = catch
train_trials = 3
output_dir = )" + (dir / "out").string() + "\n";
  io::write_file_atomic((dir / "config.ini").string(), cfg);
  const auto t0 = Clock::now();
  const int code = run_cli(paths, "compare --config \"" + (dir / "config.ini").string() + "\"", dir / "log.txt");
  const double secs = seconds_since(t0);
  if (code != 0) return {false, "compare exited with " + std::to_string(code)};

  const config::RunConfig c = config::load_config((dir / "config.ini").string());
  const double optimal = env::optimal_return(c.train.env);
  int good = 0;
  std::string per_seed;
  for (int trial = 0; trial < 3; ++trial) {
    const auto returns =
        episode_returns(dir / "out" / "catch" / "benchmark" / ("trial" + std::to_string(trial)) / "train_episodes.csv");
    const std::size_t n = std::min<std::size_t>(500, returns.size());
    const double mean = std::accumulate(returns.end() - static_cast<long>(n), returns.end(), 0.0) / static_cast<double>(n);
    if (mean >= 0.8 * optimal) ++good;
    per_seed += (trial ? ", " : "") + fmt(mean, 3);
  }
  const io::CsvTable cmp = io::parse_csv(io::read_file((dir / "out" / "comparison.csv").string()));
  bool both = false, masking = false;
  for (const auto& r : cmp.rows) {
    if (r[0] == "catch" && r[1] == "TDDM") {
      masking = std::stod(r[cmp.column("M.A.")]) > 0.0;
      both = true;
    }
  }
  bool benchmark_row = false;
  for (const auto& r : cmp.rows) benchmark_row = benchmark_row || (r[0] == "catch" && r[1] == "Benchmark");
  both = both && benchmark_row;
  const bool pass = good >= 2 && both && masking && secs <= 1800.0;
  return {pass, "final-500 mean return per seed " + per_seed + " vs 0.8 x optimal = " + fmt(0.8 * optimal, 3) + " (" +
                    std::to_string(good) + "/3 seeds pass, need 2); comparison reports TDDM and Benchmark rows: " +
                    (both ? "yes" : "no") + ", TDDM M.A. > 0: " + (masking ? "yes" : "no") + "; " + fmt(secs, 4) +
                    " s (limit 1800)"};
}

std::map<std::string, std::string> tree_contents(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = io::read_file(e.path().string());
  }
  return out;
}

// 6. compare twice gives byte-identical outputs.
Outcome determinism(const Paths& paths) {
  const fs::path dir = paths.work / "determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto config_for = [&](const std::string& out) {
    return "[net]\nlstm_units = 8\nunroll_length = 3\n"
           "[agent]\ntotal_steps = 600\nwarmup_steps = 100\nepsilon_decay_start = 100\nepsilon_decay_end = 400\n"
           "batch_size = 8\nreplay_capacity = 500\ntarget_sync_interval = 100\ntrain_interval = 2\n"
           "[eval]\ntrials = 2\nsteps_per_trial = 100\n"
           "[run]\nenvironments = catch, flicker_catch\ntrain_trials = 2\noutput_dir = " +
           out + "\n";
  };
  std::array<std::map<std::string, std::string>, 2> trees;
  for (int run = 0; run < 2; ++run) {
    const fs::path out = dir / ("run" + std::to_string(run));
    const fs::path cfg = dir / ("config" + std::to_string(run) + ".ini");
    io::write_file_atomic(cfg.string(), config_for(out.string()));
    const int code = run_cli(paths, "compare --config \"" + cfg.string() + "\"", dir / ("log" + std::to_string(run) + ".txt"));
    if (code != 0) return {false, "compare exited with " + std::to_string(code)};
    trees[static_cast<std::size_t>(run)] = tree_contents(out);
  }
  int csv = 0, steps = 0, differing = 0;
  std::set<std::string> names;
  for (const auto& [k, v] : trees[0]) names.insert(k);
  for (const auto& [k, v] : trees[1]) names.insert(k);
  for (const auto& name : names) {
    if (name == "config.ini") continue;  // holds the output directory
    const auto a = trees[0].find(name);
    const auto b = trees[1].find(name);
    if (a == trees[0].end() || b == trees[1].end() || a->second != b->second) ++differing;
    if (name.ends_with(".csv")) ++csv;
    if (name.ends_with("train_steps.csv")) ++steps;
  }
  const bool pass = differing == 0 && csv > 0 && steps == 8;
  return {pass, std::to_string(names.size()) + " files compared (" + std::to_string(csv) + " CSV, " +
                    std::to_string(steps) + " per-step logs), " + std::to_string(differing) + " differ"};
}

// 7. Entropy reference values.
Outcome entropy(const Paths&) {
  const double constant = metrics::shannon_entropy_bits(std::vector<double>(1000, 0.25));
  std::vector<double> two;
  for (int i = 0; i < 1000; ++i) two.push_back(i % 2);
  const double binary = metrics::shannon_entropy_bits(two, 2);
  std::vector<double> uniform;
  SplitMix64 rng(707);
  for (int i = 0; i < 16384; ++i) uniform.push_back(static_cast<double>(i % 16) + rng.uniform(0.25, 0.75));
  const double sixteen = metrics::shannon_entropy_bits(uniform, 16);
  const bool pass = constant == 0.0 && std::abs(binary - 1.0) <= 5e-4 && std::abs(sixteen - 4.0) <= 0.01;
  return {pass, "constant " + fmt(constant) + " bits, two-bin " + fmt(binary, 6) + " bits (expect 1.000), 16-bin " +
                    fmt(sixteen, 6) + " bits (expect 4.00 +- 0.01)"};
}

// 8. Masking identities.
Outcome masking(const Paths&) {
  SplitMix64 rng(808);
  const Frame still(test::smooth_texture(32, 32, rng));
  const mask::TddmResult same = mask::tddm(still, still, {}, {});
  double masked_sum = 0.0;
  for (double v : same.masked.values()) masked_sum += std::abs(v);
  double worst_shift = 0.0;
  for (int i = 0; i < 5; ++i) {
    for (int size : {24, 64}) {
      const Plane base = test::smooth_texture(size, size, rng);
      const mask::TddmResult r = mask::tddm(Frame(base), Frame(test::shifted(base, 1, 1)), {}, {});
      worst_shift = std::max(worst_shift, r.masking_amount);
    }
  }
  const bool pass = same.masking_amount == 1.0 && masked_sum == 0.0 && worst_shift <= 0.1;
  return {pass, "identical pair amount " + fmt(same.masking_amount) + " with masked sum " + fmt(masked_sum) +
                    "; (1,1) translation worst amount " + fmt(worst_shift) + " over 10 textures (limit 0.1)"};
}

// 9. Exploration schedule.
Outcome schedule(const Paths&) {
  const agent::TrainConfig c;
  bool ends = agent::epsilon_at(0, c) == 1.0 && agent::epsilon_at(c.epsilon_decay_start, c) == 1.0 &&
              agent::epsilon_at(c.epsilon_decay_end, c) == 0.01 && agent::epsilon_at(c.epsilon_decay_end + 1, c) == 0.01 &&
              agent::epsilon_at(10 * c.total_steps, c) == 0.01;
  if (c.epsilon_decay_start > 0) ends = ends && agent::epsilon_at(c.epsilon_decay_start - 1, c) == 1.0;
  double worst = 0.0;
  const double span = static_cast<double>(c.epsilon_decay_end - c.epsilon_decay_start);
  for (int i = 1; i <= 10; ++i) {
    const std::int64_t step = c.epsilon_decay_start + static_cast<std::int64_t>(std::llround(span * i / 11.0));
    const double expected = 1.0 - 0.99 * static_cast<double>(step - c.epsilon_decay_start) / span;
    worst = std::max(worst, std::abs(agent::epsilon_at(step, c) - expected));
  }
  return {ends && worst <= 1e-12, std::string("endpoints exact: ") + (ends ? "yes" : "no") +
                                      "; max deviation from the line at 10 interior steps " + fmt(worst)};
}

// 10. Evaluation feeds unfiltered frames yet reports masking statistics.
Outcome protocol(const Paths&) {
  agent::TrainConfig c;
  c.net.lstm_units = 16;
  c.net.unroll_length = 4;
  c.total_steps = 400;
  c.warmup_steps = 100;
  c.batch_size = 8;
  c.train_interval = 2;
  c.masking_enabled = true;
  const agent::TrainResult trained = agent::train(c);

  agent::EvalOptions o;
  std::uint64_t on_network_path = 0;
  std::int64_t fed = 0, unfiltered = 0;
  o.network_input_hook = [&](const Frame& f) {
    ++fed;
    // A raw catch frame lights exactly the ball and the three paddle pixels.
    double lit = 0.0;
    for (double v : f.values()) lit += v;
    if (lit == 4.0) ++unfiltered;
  };
  const std::uint64_t before = mask::apply_mask_calls();
  const agent::EvalResult r = agent::evaluate(trained.params, c.env, {11, 23, 37}, 300, o);
  on_network_path = mask::apply_mask_calls() - before;
  const double ma = r.record.aggregate.masking_amount;
  const double sdm = r.record.aggregate.masking_std;
  const bool pass = on_network_path == 0 && fed > 0 && unfiltered == fed && ma > 0.0 && ma <= 1.0 && sdm >= 0.0;
  return {pass, "apply_mask calls during evaluation " + std::to_string(on_network_path) + "; " + std::to_string(unfiltered) +
                    "/" + std::to_string(fed) + " network inputs unfiltered; M.A. " + fmt(ma) + ", ST.D.M " + fmt(sdm)};
}

}  // namespace

int main(int argc, char** argv) {
  mallopt(M_MMAP_THRESHOLD, 64 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
  Paths paths;
  paths.work = fs::temp_directory_path() / "tddm_acceptance";
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--cli" && i + 1 < argc) {
      paths.cli = argv[++i];
    } else if (a == "--work" && i + 1 < argc) {
      paths.work = argv[++i];
    } else if (a == "--only" && i + 1 < argc) {
      std::stringstream list(argv[++i]);
      for (std::string item; std::getline(list, item, ',');) only.insert(std::stoi(item));
    } else {
      std::cerr << "usage: acceptance --cli <tddm> [--work <dir>] [--only 1,2,...]\n";
      return 2;
    }
  }
  if (paths.cli.empty()) {
    std::cerr << "--cli is required\n";
    return 2;
  }
  fs::create_directories(paths.work);

  const std::vector<std::pair<std::string, std::function<Outcome(const Paths&)>>> criteria{
      {"flow accuracy", flow_accuracy},
      {"polynomial expansion oracle", expansion_oracle},
      {"gradient check", gradient_check},
      {"POMDP oracle equivalence", pomdp_equivalence},
      {"learning regression", learning},
      {"determinism", determinism},
      {"entropy metric", entropy},
      {"masking identities", masking},
      {"epsilon schedule", schedule},
      {"unfiltered evaluation", protocol},
  };
  int failed = 0;
  const auto t0 = Clock::now();
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.contains(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second(paths);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << "criterion " << id << " " << (o.pass ? "PASS" : "FAIL") << " " << criteria[i].first << ": " << o.detail
              << std::endl;
  }
  std::cout << "total " << fmt(seconds_since(t0), 4) << " s, " << failed << " failed" << std::endl;
  return failed == 0 ? 0 : 1;
}
