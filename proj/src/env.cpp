#include "tddm/env.hpp"

#include <algorithm>
#include <cstdlib>
#include <sstream>

namespace tddm::env {

namespace {

constexpr double kSprite = 1.0;
constexpr double kTextureLow = 0.1;
constexpr double kTextureHigh = 0.4;
constexpr int kTextureBlock = 2;
constexpr int kDodgeSeeds = 16;

bool has_texture(const EnvSpec& spec) {
  return spec.game == Game::flicker_catch || spec.background == Background::static_texture;
}

}  // namespace

std::string to_string(Game game) {
  switch (game) {
    case Game::catch_: return "catch";
    case Game::dodge: return "dodge";
    case Game::flicker_catch: return "flicker_catch";
  }
  return "?";
}

std::string to_string(Background background) {
  return background == Background::black ? "black" : "static_texture";
}

Game parse_game(const std::string& name) {
  if (name == "catch") return Game::catch_;
  if (name == "dodge") return Game::dodge;
  if (name == "flicker_catch") return Game::flicker_catch;
  throw ConfigError("unknown game '" + name + "' (expected catch, dodge or flicker_catch)");
}

Background parse_background(const std::string& name) {
  if (name == "black") return Background::black;
  if (name == "static_texture") return Background::static_texture;
  throw ConfigError("unknown background '" + name + "' (expected black or static_texture)");
}

void EnvSpec::validate() const {
  std::ostringstream errors;
  if (frame_size < 16) errors << "frame_size must be >= 16; ";
  if (episode_cap < 1) errors << "episode_cap must be >= 1; ";
  if (flicker_period < 1) errors << "flicker_period must be >= 1; ";
  const std::string text = errors.str();
  if (!text.empty()) throw ConfigError("invalid env spec: " + text);
}

Environment::Environment(const EnvSpec& spec, std::uint64_t seed) : spec_(spec), rng_(seed) {
  spec_.validate();
  const int n = spec_.frame_size;
  texture_ = Plane(n, n);
  if (has_texture(spec_)) {
    SplitMix64 tex = rng_.split();
    for (int by = 0; by < n; by += kTextureBlock) {
      for (int bx = 0; bx < n; bx += kTextureBlock) {
        const double v = tex.uniform(kTextureLow, kTextureHigh);
        for (int y = by; y < std::min(n, by + kTextureBlock); ++y) {
          for (int x = bx; x < std::min(n, bx + kTextureBlock); ++x) texture_.at(x, y) = v;
        }
      }
    }
  }
  begin_episode();
}

const Frame& Environment::begin_episode() {
  start(static_cast<int>(rng_.below(static_cast<std::uint64_t>(spec_.frame_size))));
  return observation_;
}

const Frame& Environment::begin_episode_at(int column) {
  if (column < 0 || column >= spec_.frame_size) {
    throw ContractViolation("start column outside the frame");
  }
  start(column);
  return observation_;
}

void Environment::start(int column) {
  t_ = 0;
  terminal_ = false;
  paddle_ = spec_.frame_size / 2;
  object_x_ = column;
  object_y_ = 0;
  observation_ = render();
}

StepResult Environment::step(int action) {
  if (terminal_) throw ContractViolation("step called on a terminal environment");
  if (action < 0 || action >= kNumActions) {
    throw ContractViolation("action " + std::to_string(action) + " outside [0, 3)");
  }
  const int n = spec_.frame_size;
  paddle_ = std::clamp(paddle_ + (action - 1), 1, n - 2);
  ++object_y_;
  ++t_;
  double reward = 0.0;
  if (object_y_ == n - 2) {
    const bool under = std::abs(object_x_ - paddle_) <= 1;
    if (spec_.game == Game::dodge) {
      if (under) {
        reward = -1.0;
        terminal_ = true;
      } else {
        reward = 1.0;
        object_x_ = static_cast<int>(rng_.below(static_cast<std::uint64_t>(n)));
        object_y_ = 0;
      }
    } else {
      reward = under ? 1.0 : -1.0;
      terminal_ = true;
    }
  }
  if (t_ >= spec_.episode_cap) terminal_ = true;
  observation_ = render();
  return {observation_, reward, terminal_};
}

Frame Environment::render() const {
  const int n = spec_.frame_size;
  Plane p(n, n);
  const bool blank = spec_.game == Game::flicker_catch && (t_ + 1) % spec_.flicker_period == 0;
  if (has_texture(spec_) && !blank) p = texture_;
  for (int dx = -1; dx <= 1; ++dx) p.at(paddle_ + dx, n - 1) = kSprite;
  p.at(object_x_, object_y_) = kSprite;
  return Frame(std::move(p));
}

int scripted_action(const Environment& env) {
  const int n = env.spec().frame_size;
  int target = 0;
  if (env.spec().game == Game::dodge) {
    target = env.object_x() < n / 2 ? n - 2 : 1;
  } else {
    target = std::clamp(env.object_x(), 1, n - 2);
  }
  if (env.paddle_x() < target) return right;
  if (env.paddle_x() > target) return left;
  return stay;
}

double optimal_return(const EnvSpec& spec) {
  spec.validate();
  auto rollout = [](Environment& env) {
    double total = 0.0;
    while (!env.terminal()) total += env.step(scripted_action(env)).reward;
    return total;
  };
  double sum = 0.0;
  int episodes = 0;
  if (spec.game == Game::dodge) {
    for (int seed = 0; seed < kDodgeSeeds; ++seed, ++episodes) {
      Environment env(spec, static_cast<std::uint64_t>(seed));
      sum += rollout(env);
    }
  } else {
    Environment env(spec, 0);
    for (int column = 0; column < spec.frame_size; ++column, ++episodes) {
      env.begin_episode_at(column);
      sum += rollout(env);
    }
  }
  return sum / episodes;
}

}  // namespace tddm::env
