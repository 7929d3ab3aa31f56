#pragma once

#include <cstdint>
#include <string>

#include "tddm/common.hpp"
#include "tddm/rng.hpp"

namespace tddm::env {

enum class Game { catch_, dodge, flicker_catch };
enum class Background { black, static_texture };

std::string to_string(Game game);
std::string to_string(Background background);
/// Throws ConfigError for unknown names.
Game parse_game(const std::string& name);
Background parse_background(const std::string& name);

inline constexpr int kNumActions = 3;
enum Action : int { left = 0, stay = 1, right = 2 };

struct EnvSpec {
  Game game = Game::catch_;
  int frame_size = 24;
  int episode_cap = 200;
  Background background = Background::black;
  /// flicker_catch: the background is blanked on every flicker_period-th
  /// frame. Ignored by the other games.
  int flicker_period = 2;

  /// Throws ConfigError listing every violated invariant.
  void validate() const;

  friend bool operator==(const EnvSpec&, const EnvSpec&) = default;
};

struct StepResult {
  Frame observation;
  double reward = 0.0;
  bool terminal = false;
};

/// Catch: a ball falls one row per step from a random column of the top row;
/// a 3-pixel paddle on the bottom row moves one pixel per action. When the
/// ball reaches the row above the paddle the episode ends with +1 if the
/// paddle is under it and -1 otherwise, so every episode lasts
/// frame_size - 2 steps.
///
/// Dodge: the same paddle must avoid falling rocks. Each dodged rock gives +1
/// and a new rock spawns; a hit gives -1 and ends the episode.
///
/// flicker_catch: catch over a static texture that vanishes on every
/// flicker_period-th frame.
///
/// Episodes also end after episode_cap steps. Each environment owns its
/// random stream; it is drawn when the texture is built and whenever an
/// object spawns.
class Environment {
 public:
  /// Starts the first episode. Throws ConfigError for an invalid spec.
  Environment(const EnvSpec& spec, std::uint64_t seed);

  const EnvSpec& spec() const noexcept { return spec_; }
  const Frame& observation() const noexcept { return observation_; }
  bool terminal() const noexcept { return terminal_; }
  /// Steps taken in the current episode.
  int episode_step() const noexcept { return t_; }

  /// Throws ContractViolation after a terminal step or for an action outside
  /// [0, kNumActions).
  StepResult step(int action);

  /// Begins the next episode, continuing the same random stream.
  const Frame& begin_episode();

  /// Begins an episode with the first falling object at `column`; used by
  /// scripted rollouts that enumerate every start.
  const Frame& begin_episode_at(int column);

  int paddle_x() const noexcept { return paddle_; }
  int object_x() const noexcept { return object_x_; }
  int object_y() const noexcept { return object_y_; }

 private:
  void start(int column);
  Frame render() const;

  EnvSpec spec_;
  SplitMix64 rng_;
  Plane texture_;
  Frame observation_;
  int t_ = 0;
  int paddle_ = 0;
  int object_x_ = 0;
  int object_y_ = 0;
  bool terminal_ = false;
};

/// Action of the scripted policy: move toward the ball (catch variants) or
/// away from the rock (dodge).
int scripted_action(const Environment& env);

/// Expected episode return of the scripted policy: averaged over every
/// starting column for catch variants, over a fixed set of seeds for dodge.
double optimal_return(const EnvSpec& spec);

}  // namespace tddm::env
