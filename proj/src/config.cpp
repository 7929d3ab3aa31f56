#include "tddm/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>

namespace tddm::config {

namespace {

using Setter = std::function<std::optional<std::string>(RunConfig&, const std::string&)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct Field {
  std::string section;
  std::string key;
  Setter set;
  Getter get;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) out.push_back(trim(item));
  return out;
}

template <typename T>
std::optional<T> parse_number(const std::string& s) {
  T v{};
  const char* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || s.empty()) return std::nullopt;
  return v;
}

std::optional<bool> parse_bool(const std::string& s) {
  if (s == "true" || s == "yes" || s == "on" || s == "1") return true;
  if (s == "false" || s == "no" || s == "off" || s == "0") return false;
  return std::nullopt;
}

std::string int_text(std::int64_t v) { return std::to_string(v); }

// Field factories. `check` returns an error message for out-of-range values.
Field int_field(std::string section, std::string key, std::function<std::int64_t&(RunConfig&)> ref,
                std::int64_t min, std::int64_t max = INT32_MAX) {
  auto name = key;
  return {section, key,
          [=](RunConfig& c, const std::string& v) -> std::optional<std::string> {
            const auto n = parse_number<std::int64_t>(v);
            if (!n) return name + " expects an integer, got '" + v + "'";
            if (*n < min || *n > max) {
              return name + " must be in [" + std::to_string(min) + ", " + std::to_string(max) + "], got " + v;
            }
            ref(c) = *n;
            return std::nullopt;
          },
          [=](const RunConfig& c) { return int_text(ref(const_cast<RunConfig&>(c))); }};
}

template <typename T>
Field narrow_int_field(std::string section, std::string key, std::function<T&(RunConfig&)> ref,
                       std::int64_t min, std::int64_t max = INT32_MAX) {
  auto name = key;
  return {section, key,
          [=](RunConfig& c, const std::string& v) -> std::optional<std::string> {
            const auto n = parse_number<std::int64_t>(v);
            if (!n) return name + " expects an integer, got '" + v + "'";
            if (*n < min || *n > max) {
              return name + " must be in [" + std::to_string(min) + ", " + std::to_string(max) + "], got " + v;
            }
            ref(c) = static_cast<T>(*n);
            return std::nullopt;
          },
          [=](const RunConfig& c) { return int_text(static_cast<std::int64_t>(ref(const_cast<RunConfig&>(c)))); }};
}

Field real_field(std::string section, std::string key, std::function<double&(RunConfig&)> ref,
                 std::function<bool(double)> ok, std::string range) {
  auto name = key;
  return {section, key,
          [=](RunConfig& c, const std::string& v) -> std::optional<std::string> {
            const auto x = parse_number<double>(v);
            if (!x) return name + " expects a number, got '" + v + "'";
            if (!ok(*x)) return name + " must be " + range + ", got " + v;
            ref(c) = *x;
            return std::nullopt;
          },
          [=](const RunConfig& c) { return format_double(ref(const_cast<RunConfig&>(c))); }};
}

Field conv_field(int layer) {
  const std::string key = "conv" + std::to_string(layer + 1);
  return {"net", key,
          [=](RunConfig& c, const std::string& v) -> std::optional<std::string> {
            const auto parts = split_list(v);
            std::array<int, 3> n{};
            if (parts.size() != 3) return key + " expects 'channels, kernel, stride', got '" + v + "'";
            for (int i = 0; i < 3; ++i) {
              const auto x = parse_number<int>(parts[static_cast<std::size_t>(i)]);
              if (!x || *x < 1) return key + " entries must be positive integers, got '" + v + "'";
              n[static_cast<std::size_t>(i)] = *x;
            }
            c.train.net.conv[static_cast<std::size_t>(layer)] = {n[0], n[1], n[2]};
            return std::nullopt;
          },
          [=](const RunConfig& c) {
            const auto& l = c.train.net.conv[static_cast<std::size_t>(layer)];
            return std::to_string(l.out_channels) + ", " + std::to_string(l.kernel) + ", " +
                   std::to_string(l.stride);
          }};
}

bool positive(double x) { return x > 0.0; }
bool unit_open(double x) { return x >= 0.0 && x < 1.0; }
bool unit_closed(double x) { return x >= 0.0 && x <= 1.0; }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    // [env]
    f.push_back({"env", "game",
                 [](RunConfig& c, const std::string& v) -> std::optional<std::string> {
                   try {
                     c.train.env.game = env::parse_game(v);
                   } catch (const ConfigError& e) {
                     return std::string(e.what());
                   }
                   return std::nullopt;
                 },
                 [](const RunConfig& c) { return env::to_string(c.train.env.game); }});
    f.push_back(narrow_int_field<int>("env", "frame_size", [](RunConfig& c) -> int& { return c.train.env.frame_size; }, 16, 4096));
    f.push_back(narrow_int_field<int>("env", "episode_cap", [](RunConfig& c) -> int& { return c.train.env.episode_cap; }, 1));
    f.push_back({"env", "background",
                 [](RunConfig& c, const std::string& v) -> std::optional<std::string> {
                   try {
                     c.train.env.background = env::parse_background(v);
                   } catch (const ConfigError& e) {
                     return std::string(e.what());
                   }
                   return std::nullopt;
                 },
                 [](const RunConfig& c) { return env::to_string(c.train.env.background); }});
    f.push_back(narrow_int_field<int>("env", "flicker_period", [](RunConfig& c) -> int& { return c.train.env.flicker_period; }, 1));
    // [net]
    for (int l = 0; l < 3; ++l) f.push_back(conv_field(l));
    f.push_back(narrow_int_field<int>("net", "lstm_units", [](RunConfig& c) -> int& { return c.train.net.lstm_units; }, 1));
    f.push_back(narrow_int_field<int>("net", "unroll_length", [](RunConfig& c) -> int& { return c.train.net.unroll_length; }, 1));
    // [flow]
    f.push_back(narrow_int_field<int>("flow", "pyramid_levels", [](RunConfig& c) -> int& { return c.train.flow.pyramid_levels; }, 1));
    f.push_back(real_field("flow", "pyramid_scale", [](RunConfig& c) -> double& { return c.train.flow.pyramid_scale; },
                           [](double x) { return x > 0.0 && x < 1.0; }, "in (0,1)"));
    f.push_back(narrow_int_field<int>("flow", "window_radius", [](RunConfig& c) -> int& { return c.train.flow.window_radius; }, 1));
    f.push_back(real_field("flow", "expansion_sigma", [](RunConfig& c) -> double& { return c.train.flow.expansion_sigma; },
                           positive, "> 0"));
    f.push_back(narrow_int_field<int>("flow", "iterations", [](RunConfig& c) -> int& { return c.train.flow.iterations_per_level; }, 1));
    // [mask]
    f.push_back({"mask", "method",
                 [](RunConfig& c, const std::string& v) -> std::optional<std::string> {
                   if (v == "otsu") {
                     c.train.threshold.method = mask::ThresholdMethod::otsu;
                   } else if (v == "mean_plus_k_sigma") {
                     c.train.threshold.method = mask::ThresholdMethod::mean_plus_k_sigma;
                   } else {
                     return "method must be otsu or mean_plus_k_sigma, got '" + v + "'";
                   }
                   return std::nullopt;
                 },
                 [](const RunConfig& c) {
                   return std::string(c.train.threshold.method == mask::ThresholdMethod::otsu ? "otsu"
                                                                                              : "mean_plus_k_sigma");
                 }});
    f.push_back(real_field("mask", "k", [](RunConfig& c) -> double& { return c.train.threshold.k; },
                           [](double x) { return x >= 0.0; }, ">= 0"));
    f.push_back(real_field("mask", "floor", [](RunConfig& c) -> double& { return c.train.threshold.floor; },
                           [](double x) { return x >= 0.0; }, ">= 0"));
    f.push_back(narrow_int_field<int>("mask", "bins", [](RunConfig& c) -> int& { return c.train.threshold.bins; }, 2));
    f.push_back(real_field("mask", "min_separability",
                           [](RunConfig& c) -> double& { return c.train.threshold.min_separability; }, unit_closed,
                           "in [0,1]"));
    f.push_back(real_field("mask", "min_keep_fraction",
                           [](RunConfig& c) -> double& { return c.train.threshold.min_keep_fraction; }, unit_closed,
                           "in [0,1]"));
    // [agent]
    f.push_back({"agent", "masking",
                 [](RunConfig& c, const std::string& v) -> std::optional<std::string> {
                   const auto b = parse_bool(v);
                   if (!b) return "masking expects true or false, got '" + v + "'";
                   c.train.masking_enabled = *b;
                   return std::nullopt;
                 },
                 [](const RunConfig& c) { return std::string(c.train.masking_enabled ? "true" : "false"); }});
    f.push_back(int_field("agent", "total_steps", [](RunConfig& c) -> std::int64_t& { return c.train.total_steps; }, 1, INT64_MAX));
    f.push_back(int_field("agent", "warmup_steps", [](RunConfig& c) -> std::int64_t& { return c.train.warmup_steps; }, 0, INT64_MAX));
    f.push_back(real_field("agent", "epsilon_start", [](RunConfig& c) -> double& { return c.train.epsilon_start; },
                           unit_closed, "in [0,1]"));
    f.push_back(real_field("agent", "epsilon_end", [](RunConfig& c) -> double& { return c.train.epsilon_end; },
                           unit_closed, "in [0,1]"));
    f.push_back(int_field("agent", "epsilon_decay_start",
                          [](RunConfig& c) -> std::int64_t& { return c.train.epsilon_decay_start; }, 0, INT64_MAX));
    f.push_back(int_field("agent", "epsilon_decay_end",
                          [](RunConfig& c) -> std::int64_t& { return c.train.epsilon_decay_end; }, 0, INT64_MAX));
    f.push_back(real_field("agent", "gamma", [](RunConfig& c) -> double& { return c.train.gamma; }, unit_open,
                           "in [0,1)"));
    f.push_back(narrow_int_field<int>("agent", "batch_size", [](RunConfig& c) -> int& { return c.train.batch_size; }, 1));
    f.push_back(narrow_int_field<std::size_t>("agent", "replay_capacity",
                                              [](RunConfig& c) -> std::size_t& { return c.train.replay_capacity; }, 1,
                                              INT64_MAX));
    f.push_back(int_field("agent", "target_sync_interval",
                          [](RunConfig& c) -> std::int64_t& { return c.train.target_sync_interval; }, 0, INT64_MAX));
    f.push_back(narrow_int_field<int>("agent", "train_interval", [](RunConfig& c) -> int& { return c.train.train_interval; }, 1));
    f.push_back(narrow_int_field<int>("agent", "report_intervals", [](RunConfig& c) -> int& { return c.train.report_intervals; }, 1));
    f.push_back(narrow_int_field<std::uint64_t>("agent", "seed", [](RunConfig& c) -> std::uint64_t& { return c.train.seed; }, 0,
                                                INT64_MAX));
    // [optimizer]
    f.push_back(real_field("optimizer", "learning_rate",
                           [](RunConfig& c) -> double& { return c.train.optimizer.learning_rate; }, positive, "> 0"));
    f.push_back(real_field("optimizer", "squared_decay",
                           [](RunConfig& c) -> double& { return c.train.optimizer.squared_decay; }, unit_open,
                           "in [0,1)"));
    f.push_back(real_field("optimizer", "momentum", [](RunConfig& c) -> double& { return c.train.optimizer.momentum; },
                           unit_open, "in [0,1)"));
    f.push_back(real_field("optimizer", "epsilon", [](RunConfig& c) -> double& { return c.train.optimizer.epsilon; },
                           positive, "> 0"));
    f.push_back(real_field("optimizer", "clip", [](RunConfig& c) -> double& { return c.train.optimizer.clip; },
                           positive, "> 0"));
    f.push_back(real_field("optimizer", "lr_decay", [](RunConfig& c) -> double& { return c.train.optimizer.lr_decay; },
                           [](double x) { return x > 0.0 && x <= 1.0; }, "in (0,1]"));
    f.push_back(int_field("optimizer", "decay_interval",
                          [](RunConfig& c) -> std::int64_t& { return c.train.optimizer.decay_interval; }, 1, INT64_MAX));
    // [eval]
    f.push_back({"eval", "seeds",
                 [](RunConfig& c, const std::string& v) -> std::optional<std::string> {
                   std::vector<std::uint64_t> seeds;
                   for (const auto& part : split_list(v)) {
                     const auto s = parse_number<std::uint64_t>(part);
                     if (!s) return "seeds expects a comma-separated list of integers, got '" + v + "'";
                     seeds.push_back(*s);
                   }
                   if (seeds.empty()) return std::string("seeds must list at least one seed");
                   c.eval_seeds = seeds;
                   return std::nullopt;
                 },
                 [](const RunConfig& c) {
                   std::string out;
                   for (std::size_t i = 0; i < c.eval_seeds.size(); ++i) {
                     out += (i ? ", " : "") + std::to_string(c.eval_seeds[i]);
                   }
                   return out;
                 }});
    f.push_back(narrow_int_field<int>("eval", "trials", [](RunConfig& c) -> int& { return c.eval_trials; }, 1));
    f.push_back(int_field("eval", "steps_per_trial", [](RunConfig& c) -> std::int64_t& { return c.eval_steps; }, 1, INT64_MAX));
    f.push_back(real_field("eval", "epsilon", [](RunConfig& c) -> double& { return c.eval_epsilon; }, unit_closed,
                           "in [0,1]"));
    f.push_back(narrow_int_field<int>("eval", "bins", [](RunConfig& c) -> int& { return c.entropy_bins; }, 2));
    // [run]
    f.push_back({"run", "output_dir",
                 [](RunConfig& c, const std::string& v) -> std::optional<std::string> {
                   if (v.empty()) return std::string("output_dir must not be empty");
                   c.output_dir = v;
                   return std::nullopt;
                 },
                 [](const RunConfig& c) { return c.output_dir; }});
    f.push_back(narrow_int_field<int>("run", "train_trials", [](RunConfig& c) -> int& { return c.train_trials; }, 1));
    f.push_back({"run", "environments",
                 [](RunConfig& c, const std::string& v) -> std::optional<std::string> {
                   std::vector<env::Game> games;
                   for (const auto& part : split_list(v)) {
                     try {
                       games.push_back(env::parse_game(part));
                     } catch (const ConfigError& e) {
                       return std::string(e.what());
                     }
                   }
                   if (games.empty()) return std::string("environments must list at least one game");
                   c.environments = games;
                   return std::nullopt;
                 },
                 [](const RunConfig& c) {
                   std::string out;
                   for (std::size_t i = 0; i < c.environments.size(); ++i) {
                     out += (i ? ", " : "") + env::to_string(c.environments[i]);
                   }
                   return out;
                 }});
    return f;
  }();
  return table;
}

const Field* find_field(const std::string& section, const std::string& key) {
  for (const auto& f : fields()) {
    if (f.section == section && f.key == key) return &f;
  }
  return nullptr;
}

bool known_section(const std::string& section) {
  return std::any_of(fields().begin(), fields().end(), [&](const Field& f) { return f.section == section; });
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) throw Error(ErrorCategory::numeric, "cannot format number");
  return std::string(buf, ptr);
}

RunConfig parse_config(const std::string& text) {
  RunConfig config;
  std::vector<std::string> errors;
  std::map<std::string, int> seen;  // "section.key" -> line
  auto error = [&](int line, const std::string& what) {
    errors.push_back("line " + std::to_string(line) + ": " + what);
  };

  std::istringstream in(text);
  std::string raw;
  std::string section;
  bool section_ok = false;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (const auto hash = raw.find_first_of("#;"); hash != std::string::npos) raw.erase(hash);
    const std::string s = trim(raw);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') {
        error(line, "malformed section header '" + s + "'");
        section_ok = false;
        continue;
      }
      section = trim(s.substr(1, s.size() - 2));
      section_ok = known_section(section);
      if (!section_ok) error(line, "unknown section [" + section + "]");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      error(line, "expected 'key = value', got '" + s + "'");
      continue;
    }
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (section.empty()) {
      error(line, "key '" + key + "' appears before any section header");
      continue;
    }
    if (!section_ok) continue;
    const Field* field = find_field(section, key);
    if (!field) {
      error(line, "unknown key '" + key + "' in [" + section + "]");
      continue;
    }
    const std::string qualified = section + "." + key;
    if (const auto it = seen.find(qualified); it != seen.end()) {
      error(line, "duplicate key '" + qualified + "' (first set on line " + std::to_string(it->second) +
                      ", again on line " + std::to_string(line) + ")");
      continue;
    }
    seen[qualified] = line;
    if (auto problem = field->set(config, value)) error(line, *problem);
  }

  // Cross-field invariants, reported at the latest line that set one of the
  // keys involved.
  auto line_of = [&](std::initializer_list<const char*> keys) {
    int best = 0;
    for (const char* k : keys) {
      if (const auto it = seen.find(k); it != seen.end()) best = std::max(best, it->second);
    }
    return best;
  };
  auto cross = [&](bool ok, std::initializer_list<const char*> keys, const std::string& what) {
    if (!ok) error(line_of(keys), what);
  };
  const auto& t = config.train;
  cross(t.epsilon_start >= t.epsilon_end, {"agent.epsilon_start", "agent.epsilon_end"},
        "epsilon_start must be >= epsilon_end");
  cross(t.epsilon_decay_start <= t.epsilon_decay_end, {"agent.epsilon_decay_start", "agent.epsilon_decay_end"},
        "epsilon_decay_start must be <= epsilon_decay_end");
  cross(t.total_steps >= t.warmup_steps, {"agent.total_steps", "agent.warmup_steps"},
        "total_steps must be >= warmup_steps");
  cross(static_cast<std::size_t>(config.eval_trials) <= config.eval_seeds.size(), {"eval.trials", "eval.seeds"},
        "eval trials (" + std::to_string(config.eval_trials) + ") exceed the number of seeds (" +
            std::to_string(config.eval_seeds.size()) + ")");

  config.train.net.input_height = config.train.env.frame_size;
  config.train.net.input_width = config.train.env.frame_size;
  if (errors.empty()) {
    try {
      config.train.validate();
    } catch (const ConfigError& e) {
      error(line_of({"net.conv1", "net.conv2", "net.conv3", "env.frame_size"}), e.what());
    }
  }
  if (!errors.empty()) {
    std::string joined = "configuration has " + std::to_string(errors.size()) + " error(s):";
    for (const auto& e : errors) joined += "\n  " + e;
    throw ConfigError(joined);
  }
  return config;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_config(text.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string format_config(const RunConfig& config) {
  std::ostringstream out;
  std::string section;
  for (const auto& f : fields()) {
    if (f.section != section) {
      if (!section.empty()) out << '\n';
      section = f.section;
      out << '[' << section << "]\n";
    }
    out << f.key << " = " << f.get(config) << '\n';
  }
  return out.str();
}

}  // namespace tddm::config
