#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "tddm/common.hpp"
#include "tddm/rng.hpp"

namespace tddm::replay {

/// One environment step: the observation the action was chosen from, the
/// action, the reward it earned and whether it ended the episode.
struct Transition {
  Frame observation;
  int action = 0;
  double reward = 0.0;
  bool terminal = false;
  std::int64_t episode_id = 0;
};

/// Contiguous run of stored transitions, by logical index (0 = oldest).
struct Span {
  std::size_t first = 0;
  std::size_t length = 0;
  std::size_t last() const noexcept { return first + length - 1; }
};

/// FIFO ring of transitions.
class ReplayMemory {
 public:
  /// Throws ContractViolation when capacity is zero.
  explicit ReplayMemory(std::size_t capacity);

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return size_; }

  /// Appends, evicting the oldest transition when full. Throws
  /// ContractViolation if the episode id decreases or the reward is not
  /// finite.
  void push(Transition t);

  /// Logical index 0 is the oldest stored transition.
  const Transition& at(std::size_t i) const;

  /// `batch` sequences of `length` transitions drawn independently and
  /// uniformly over every start offset whose run stays inside one episode.
  /// Throws Error(data, "insufficient history") when there is none.
  std::vector<Span> sample_sequences(std::size_t batch, std::size_t length, SplitMix64& rng) const;
  std::vector<std::vector<Transition>> sample_transitions(std::size_t batch, std::size_t length,
                                                          SplitMix64& rng) const;

  /// Whether transition i can end a training window: it is terminal, or its
  /// successor in the same episode is stored.
  bool has_successor_or_terminal(std::size_t i) const;

  /// Up to `max_length` transitions of one episode ending at i.
  Span window_ending_at(std::size_t i, std::size_t max_length) const;

  /// `batch` windows drawn uniformly over every valid final transition (see
  /// has_successor_or_terminal), each extended back up to `max_length`
  /// steps within its episode. Throws Error(data, "insufficient history")
  /// when no transition qualifies.
  std::vector<Span> sample_windows(std::size_t batch, std::size_t max_length, SplitMix64& rng) const;

 private:
  std::size_t physical(std::size_t i) const noexcept { return (head_ + i) % capacity_; }

  std::size_t capacity_;
  std::vector<Transition> ring_;
  std::size_t head_ = 0;
  std::size_t size_ = 0;
};

}  // namespace tddm::replay
