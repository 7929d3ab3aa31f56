#include "tddm/replay.hpp"

#include <cmath>

namespace tddm::replay {

namespace {

[[noreturn]] void insufficient() { throw Error(ErrorCategory::data, "insufficient history"); }

}  // namespace

ReplayMemory::ReplayMemory(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ContractViolation("replay capacity must be >= 1");
}

void ReplayMemory::push(Transition t) {
  if (!std::isfinite(t.reward)) throw ContractViolation("replay: reward must be finite");
  if (size_ > 0 && t.episode_id < at(size_ - 1).episode_id) {
    throw ContractViolation("replay: episode ids must not decrease");
  }
  if (ring_.size() < capacity_) {
    ring_.push_back(std::move(t));
    ++size_;
    return;
  }
  if (size_ < capacity_) {
    ring_[physical(size_)] = std::move(t);
    ++size_;
    return;
  }
  ring_[head_] = std::move(t);
  head_ = (head_ + 1) % capacity_;
}

const Transition& ReplayMemory::at(std::size_t i) const {
  if (i >= size_) throw ContractViolation("replay index out of range");
  return ring_[physical(i)];
}

std::vector<Span> ReplayMemory::sample_sequences(std::size_t batch, std::size_t length,
                                                 SplitMix64& rng) const {
  if (length == 0) throw ContractViolation("sequence length must be >= 1");
  // run = length of the same-episode run ending at i.
  std::vector<std::size_t> starts;
  std::size_t run = 0;
  for (std::size_t i = 0; i < size_; ++i) {
    run = (i > 0 && at(i).episode_id == at(i - 1).episode_id) ? run + 1 : 1;
    if (run >= length) starts.push_back(i + 1 - length);
  }
  if (starts.empty()) insufficient();
  std::vector<Span> out;
  out.reserve(batch);
  for (std::size_t b = 0; b < batch; ++b) out.push_back({starts[rng.below(starts.size())], length});
  return out;
}

std::vector<std::vector<Transition>> ReplayMemory::sample_transitions(std::size_t batch,
                                                                      std::size_t length,
                                                                      SplitMix64& rng) const {
  std::vector<std::vector<Transition>> out;
  for (const Span& s : sample_sequences(batch, length, rng)) {
    std::vector<Transition> seq;
    for (std::size_t i = s.first; i <= s.last(); ++i) seq.push_back(at(i));
    out.push_back(std::move(seq));
  }
  return out;
}

bool ReplayMemory::has_successor_or_terminal(std::size_t i) const {
  const Transition& t = at(i);
  return t.terminal || (i + 1 < size_ && at(i + 1).episode_id == t.episode_id);
}

Span ReplayMemory::window_ending_at(std::size_t i, std::size_t max_length) const {
  if (max_length == 0) throw ContractViolation("window length must be >= 1");
  const std::int64_t id = at(i).episode_id;
  std::size_t first = i;
  while (first > 0 && i - first + 1 < max_length && at(first - 1).episode_id == id) --first;
  return {first, i - first + 1};
}

std::vector<Span> ReplayMemory::sample_windows(std::size_t batch, std::size_t max_length,
                                               SplitMix64& rng) const {
  std::vector<std::size_t> finals;
  finals.reserve(size_);
  for (std::size_t i = 0; i < size_; ++i) {
    if (has_successor_or_terminal(i)) finals.push_back(i);
  }
  if (finals.empty()) insufficient();
  std::vector<Span> out;
  out.reserve(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    out.push_back(window_ending_at(finals[rng.below(finals.size())], max_length));
  }
  return out;
}

}  // namespace tddm::replay
