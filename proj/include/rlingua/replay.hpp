#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "rlingua/rng.hpp"

namespace rlingua {

enum class Provenance : std::uint8_t { rl = 0, llm = 1 };

struct GoalTransition {
  std::vector<double> observation;
  std::vector<double> action;
  double reward = 0.0;
  std::vector<double> next_observation;
  bool terminal = false;
  bool truncated = false;
  std::vector<double> desired_goal;
  std::vector<double> achieved_goal_next;
  Provenance provenance = Provenance::rl;
  std::uint64_t episode_id = 0;
  int step_index = 0;

  friend bool operator==(const GoalTransition&, const GoalTransition&) = default;
};

/// Hindsight relabeling with the "future" strategy: k relabeled draws per
/// original draw on average.
struct HerConfig {
  int k = 4;
  double relabel_probability() const { return k <= 0 ? 0.0 : k / (k + 1.0); }
};

class EmptyBufferError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using RewardFn = std::function<double(std::span<const double> achieved,
                                      std::span<const double> desired)>;

/// Fixed-capacity FIFO; storage grows lazily up to the capacity.
class RingBuffer {
 public:
  explicit RingBuffer(std::size_t capacity = 1'000'000);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return slots_.size() < capacity_ ? slots_.size() : capacity_; }
  bool empty() const { return slots_.empty(); }

  /// Stores `t`; returns the entry it overwrote, if any.
  std::optional<GoalTransition> push(GoalTransition t);

  /// Storage slot access, 0 <= slot < size(); uniform over slots is uniform
  /// over stored transitions.
  const GoalTransition& slot(std::size_t i) const { return slots_[i]; }
  /// Chronological access, 0 = oldest.
  const GoalTransition& at(std::size_t i) const;
  /// Slot the next push overwrites once the buffer is full.
  std::size_t write_cursor() const { return next_; }

  friend bool operator==(const RingBuffer&, const RingBuffer&) = default;

 private:
  friend class DualReplay;
  std::size_t capacity_;
  std::size_t next_ = 0;  // slot written by the next push once full
  std::vector<GoalTransition> slots_;
};

struct SampledTransition {
  GoalTransition transition;  // goal, reward and terminal possibly relabeled
  std::size_t slot = 0;
  bool relabeled = false;
  int goal_source_step = -1;  // step whose achieved_goal_next became the goal
};

/// Achieved goals of one episode, kept while any of its steps is stored.
struct EpisodeRecord {
  std::vector<std::vector<double>> achieved_goal_next;  // by step index
  std::size_t live = 0;
  bool closed = false;
  friend bool operator==(const EpisodeRecord&, const EpisodeRecord&) = default;
};

/// The RL and LLM buffers plus a shared episode index for relabeling.
class DualReplay {
 public:
  explicit DualReplay(std::size_t rl_capacity = 1'000'000,
                      std::size_t llm_capacity = 1'000'000);

  /// Routes `t` by provenance. Steps of one episode must arrive in order.
  void push(GoalTransition t);

  const RingBuffer& buffer(Provenance which) const;
  std::size_t size(Provenance which) const { return buffer(which).size(); }
  std::size_t episode_count() const { return episodes_.size(); }
  const EpisodeRecord* episode(std::uint64_t id) const;

  /// `n` uniform draws from one buffer. Each draw is relabeled with
  /// probability k/(k+1) using the achieved goal after a uniformly chosen
  /// step t' >= step of the same episode; reward and terminal are recomputed.
  /// Throws EmptyBufferError when the buffer is empty.
  std::vector<SampledTransition> sample_with_her(Provenance which, std::size_t n,
                                                 const HerConfig& her,
                                                 const RewardFn& reward_fn, Rng& rng) const;

  friend bool operator==(const DualReplay&, const DualReplay&) = default;

  void write(std::ostream& out) const;
  static DualReplay read(std::istream& in);

 private:
  RingBuffer& buffer(Provenance which);
  void release(const GoalTransition& evicted);

  RingBuffer rl_;
  RingBuffer llm_;
  std::unordered_map<std::uint64_t, EpisodeRecord> episodes_;
};

}  // namespace rlingua
