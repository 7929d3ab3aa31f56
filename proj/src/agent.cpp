#include "tddm/agent.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

#include "tddm/replay.hpp"

namespace tddm::agent {

namespace {

int greedy(const Eigen::VectorXd& q) {
  int best = 0;
  for (int a = 1; a < q.size(); ++a) {
    if (q(a) > q(best)) best = a;
  }
  return best;
}

// The last unroll_length frames of the running episode, run from a zero
// hidden state. Conv features are cached until the weights change.
class Window {
 public:
  explicit Window(int capacity) : capacity_(capacity) {}

  void clear() {
    frames_.clear();
    features_.clear();
  }

  void push(Frame frame) {
    frames_.push_back(std::move(frame));
    features_.push_back(std::nullopt);
    if (static_cast<int>(frames_.size()) > capacity_) {
      frames_.pop_front();
      features_.pop_front();
    }
  }

  void invalidate() {
    for (auto& f : features_) f.reset();
  }

  const Frame& latest() const { return frames_.back(); }

  // Q at the last frame; `state` receives the final hidden state.
  Eigen::VectorXd q(const net::NetworkParams& params, net::HiddenState& state) {
    state = net::HiddenState::zeros(params.spec().lstm_units);
    Eigen::VectorXd out;
    for (std::size_t t = 0; t < frames_.size(); ++t) {
      if (!features_[t]) features_[t] = net::conv_features(params, frames_[t]);
      out = net::lstm_step(params, *features_[t], state);
    }
    return out;
  }

  const Eigen::VectorXd& latest_features() const { return *features_.back(); }

 private:
  int capacity_;
  std::deque<Frame> frames_;
  std::deque<std::optional<Eigen::VectorXd>> features_;
};

void check_geometry(const env::EnvSpec& e, const net::NetworkSpec& n) {
  if (n.input_height != e.frame_size || n.input_width != e.frame_size) {
    std::ostringstream msg;
    msg << "network input " << n.input_width << "x" << n.input_height << " does not match frame size "
        << e.frame_size;
    throw ConfigError(msg.str());
  }
  if (n.n_actions != env::kNumActions) {
    throw ConfigError("network must have " + std::to_string(env::kNumActions) + " actions");
  }
}

std::vector<const Frame*> frames_of(const replay::ReplayMemory& memory, const replay::Span& span) {
  std::vector<const Frame*> out;
  out.reserve(span.length);
  for (std::size_t i = span.first; i <= span.last(); ++i) out.push_back(&memory.at(i).observation);
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  std::ostringstream errors;
  auto check = [&](auto&& fn) {
    try {
      fn();
    } catch (const ConfigError& e) {
      errors << e.what() << "; ";
    }
  };
  check([&] { env.validate(); });
  check([&] { net.validate(); });
  check([&] { flow.validate(); });
  check([&] { threshold.validate(); });
  check([&] { optimizer.validate(); });
  check([&] { check_geometry(env, net); });
  if (!(epsilon_start >= epsilon_end && epsilon_end >= 0.0 && epsilon_start <= 1.0)) {
    errors << "epsilon must satisfy 1 >= epsilon_start >= epsilon_end >= 0; ";
  }
  if (epsilon_decay_start < 0 || epsilon_decay_end < epsilon_decay_start) {
    errors << "epsilon decay window must satisfy 0 <= start <= end; ";
  }
  if (!(gamma >= 0.0 && gamma < 1.0)) errors << "gamma must be in [0,1); ";
  if (warmup_steps < 0) errors << "warmup_steps must be >= 0; ";
  if (total_steps < 1 || total_steps < warmup_steps) errors << "total_steps must be >= max(1, warmup_steps); ";
  if (batch_size < 1) errors << "batch_size must be >= 1; ";
  if (replay_capacity < 1) errors << "replay_capacity must be >= 1; ";
  if (target_sync_interval < 0) errors << "target_sync_interval must be >= 0; ";
  if (train_interval < 1) errors << "train_interval must be >= 1; ";
  if (report_intervals < 1) errors << "report_intervals must be >= 1; ";
  const std::string text = errors.str();
  if (!text.empty()) throw ConfigError("invalid training config: " + text);
}

double epsilon_at(std::int64_t step, const TrainConfig& config) {
  if (step < 0) throw ContractViolation("epsilon_at: step must be >= 0");
  if (step <= config.epsilon_decay_start) return config.epsilon_start;
  if (step >= config.epsilon_decay_end) return config.epsilon_end;
  const double frac = static_cast<double>(step - config.epsilon_decay_start) /
                      static_cast<double>(config.epsilon_decay_end - config.epsilon_decay_start);
  return config.epsilon_start + (config.epsilon_end - config.epsilon_start) * frac;
}

double td_target(double reward, bool terminal, std::span<const double> successor_q, double gamma) {
  if (terminal) return reward;
  if (successor_q.empty()) throw ContractViolation("td_target: successor Q-values required");
  return reward + gamma * *std::max_element(successor_q.begin(), successor_q.end());
}

double TrainReport::mean_final_return(std::size_t count) const {
  if (episodes.empty()) return 0.0;
  const std::size_t n = std::min(count, episodes.size());
  double sum = 0.0;
  for (std::size_t i = episodes.size() - n; i < episodes.size(); ++i) sum += episodes[i].total_return;
  return sum / static_cast<double>(n);
}

TrainResult train(const TrainConfig& config) {
  config.validate();
  SplitMix64 root(config.seed);
  SplitMix64 env_stream = root.split();
  SplitMix64 explore = root.split();
  SplitMix64 sampler = root.split();
  SplitMix64 init = root.split();

  env::Environment environment(config.env, env_stream.next());
  net::NetworkParams online = net::NetworkParams::random(config.net, init);
  net::NetworkParams target = online;
  net::OptimizerState opt = net::OptimizerState::for_params(online, config.optimizer);
  replay::ReplayMemory memory(config.replay_capacity);
  Window window(config.net.unroll_length);
  const bool use_target = config.target_sync_interval > 0;

  TrainReport report;
  report.steps.reserve(static_cast<std::size_t>(config.total_steps));
  const std::int64_t interval_len =
      std::max<std::int64_t>(1, config.total_steps / config.report_intervals);
  const int interval_count = static_cast<int>(
      std::min<std::int64_t>(config.report_intervals, (config.total_steps + interval_len - 1) / interval_len));
  report.intervals.resize(static_cast<std::size_t>(interval_count));
  for (int i = 0; i < interval_count; ++i) {
    auto& row = report.intervals[static_cast<std::size_t>(i)];
    row.index = i;
    row.first_step = i * interval_len;
    row.last_step = i + 1 == interval_count ? config.total_steps - 1 : (i + 1) * interval_len - 1;
  }
  std::vector<double> q_sums(report.intervals.size(), 0.0);
  std::vector<std::int64_t> q_counts(report.intervals.size(), 0);

  std::int64_t episode = 0;
  int episode_length = 0;
  double episode_return = 0.0;
  std::optional<Frame> previous_raw;
  std::optional<double> pending_mask;

  auto observe = [&](const Frame& raw) {
    pending_mask.reset();
    if (config.masking_enabled && previous_raw) {
      mask::TddmResult r = mask::tddm(*previous_raw, raw, config.flow, config.threshold);
      pending_mask = r.masking_amount;
      window.push(std::move(r.masked));
    } else {
      window.push(raw);
    }
  };
  observe(environment.observation());

  net::HiddenState state;
  for (std::int64_t step = 0; step < config.total_steps; ++step) {
    const auto interval = static_cast<std::size_t>(
        std::min<std::int64_t>(step / interval_len, interval_count - 1));
    StepLog log;
    log.step = step;
    log.episode = episode;
    log.epsilon = epsilon_at(step, config);
    log.masking_amount = pending_mask;

    const Eigen::VectorXd q = window.q(online, state);
    log.max_q = q.maxCoeff();
    q_sums[interval] += log.max_q;
    ++q_counts[interval];
    const bool random = explore.uniform() < log.epsilon;
    log.action = random ? static_cast<int>(explore.below(env::kNumActions)) : greedy(q);

    const Frame raw = environment.observation();
    const env::StepResult result = environment.step(log.action);
    log.reward = result.reward;
    log.terminal = result.terminal;
    memory.push({window.latest(), log.action, result.reward, result.terminal, episode});
    episode_return += result.reward;
    ++episode_length;

    if (result.terminal) {
      report.episodes.push_back({episode, step, episode_length, episode_return});
      report.intervals[interval].cumulative_return += episode_return;
      ++report.intervals[interval].episodes;
      ++episode;
      episode_length = 0;
      episode_return = 0.0;
      previous_raw.reset();
      window.clear();
      observe(environment.begin_episode());
    } else {
      previous_raw = raw;
      observe(result.observation);
    }

    if (step >= config.warmup_steps && (step - config.warmup_steps) % config.train_interval == 0) {
      const auto spans = memory.sample_windows(static_cast<std::size_t>(config.batch_size),
                                               static_cast<std::size_t>(config.net.unroll_length), sampler);
      net::Batch batch;
      std::vector<std::vector<const Frame*>> successors;
      std::vector<std::size_t> successor_of;
      for (const auto& span : spans) {
        const replay::Transition& last = memory.at(span.last());
        batch.sequences.push_back(frames_of(memory, span));
        batch.actions.push_back(last.action);
        batch.targets.push_back(last.reward);
        if (!last.terminal) {
          successor_of.push_back(batch.targets.size() - 1);
          successors.push_back(frames_of(
              memory, memory.window_ending_at(span.last() + 1,
                                              static_cast<std::size_t>(config.net.unroll_length))));
        }
      }
      if (!successors.empty()) {
        const Eigen::MatrixXd next_q = net::final_q(use_target ? target : online, successors);
        for (std::size_t k = 0; k < successors.size(); ++k) {
          double& y = batch.targets[successor_of[k]];
          y = td_target(y, false, std::span<const double>(next_q.col(static_cast<Eigen::Index>(k)).data(),
                                                          static_cast<std::size_t>(next_q.rows())),
                        config.gamma);
        }
      }
      try {
        net::LossAndGradient lg = net::loss_and_gradient(online, batch);
        net::rmsprop_step(online, lg.grads, opt, config.optimizer);
        log.loss = lg.loss;
      } catch (const net::Divergence& d) {
        throw net::Divergence(d.batch_index(), "training diverged at step " + std::to_string(step) +
                                                   ": " + d.what());
      }
      ++report.optimizer_steps;
      window.invalidate();
    }
    if (use_target && (step + 1) % config.target_sync_interval == 0) target = online;
    report.steps.push_back(log);
  }
  for (std::size_t i = 0; i < report.intervals.size(); ++i) {
    report.intervals[i].average_q = q_counts[i] ? q_sums[i] / static_cast<double>(q_counts[i]) : 0.0;
  }
  return {std::move(online), std::move(report)};
}

EvalResult evaluate(const net::NetworkParams& params, const env::EnvSpec& env_spec,
                    const std::vector<std::uint64_t>& seeds, std::int64_t steps_per_trial,
                    const EvalOptions& options) {
  env_spec.validate();
  check_geometry(env_spec, params.spec());
  if (seeds.empty()) throw ConfigError("evaluation needs at least one seed");
  if (steps_per_trial < 1) throw ConfigError("steps_per_trial must be >= 1");
  if (!(options.epsilon >= 0.0 && options.epsilon <= 1.0)) throw ConfigError("epsilon must be in [0,1]");
  options.flow.validate();
  options.threshold.validate();

  EvalResult out;
  for (std::uint64_t seed : seeds) {
    SplitMix64 root(seed);
    SplitMix64 env_stream = root.split();
    SplitMix64 explore = root.split();
    env::Environment environment(env_spec, env_stream.next());
    Window window(params.spec().unroll_length);
    metrics::TrialTrace trace;
    std::optional<Frame> previous;
    double episode_return = 0.0;

    auto observe = [&](const Frame& raw) {
      if (previous) {
        const mask::BinaryMask m = mask::transition_mask(*previous, raw, options.flow, options.threshold);
        trace.masking_amounts.push_back(mask::masking_amount(m));
      }
      if (options.network_input_hook) options.network_input_hook(raw);
      window.push(raw);
    };
    observe(environment.observation());

    net::HiddenState state;
    for (std::int64_t step = 0; step < steps_per_trial; ++step) {
      const Eigen::VectorXd q = window.q(params, state);
      trace.hidden_states.emplace_back(state.h.data(), state.h.data() + state.h.size());
      const Eigen::VectorXd& x = window.latest_features();
      trace.features.emplace_back(x.data(), x.data() + x.size());
      const bool random = explore.uniform() < options.epsilon;
      const int action = random ? static_cast<int>(explore.below(env::kNumActions)) : greedy(q);
      trace.actions.push_back(action);

      const Frame raw = environment.observation();
      const env::StepResult result = environment.step(action);
      episode_return += result.reward;
      if (result.terminal) {
        trace.episode_returns.push_back(episode_return);
        episode_return = 0.0;
        previous.reset();
        window.clear();
        observe(environment.begin_episode());
      } else {
        previous = raw;
        observe(result.observation);
      }
    }
    trace.unfinished_return = episode_return;
    out.traces.push_back(std::move(trace));
  }
  out.record = metrics::summarize(out.traces, options.bins);
  return out;
}

}  // namespace tddm::agent
