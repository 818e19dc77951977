#include "rlingua/replay.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <string>

#include "textio.hpp"

namespace rlingua {

RingBuffer::RingBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
}

std::optional<GoalTransition> RingBuffer::push(GoalTransition t) {
  if (slots_.size() < capacity_) {
    slots_.push_back(std::move(t));
    return std::nullopt;
  }
  GoalTransition evicted = std::exchange(slots_[next_], std::move(t));
  next_ = (next_ + 1) % capacity_;
  return evicted;
}

const GoalTransition& RingBuffer::at(std::size_t i) const {
  if (i >= size()) throw std::out_of_range("ring buffer index out of range");
  return slots_.size() < capacity_ ? slots_[i] : slots_[(next_ + i) % capacity_];
}

DualReplay::DualReplay(std::size_t rl_capacity, std::size_t llm_capacity)
    : rl_(rl_capacity), llm_(llm_capacity) {}

const RingBuffer& DualReplay::buffer(Provenance which) const {
  return which == Provenance::llm ? llm_ : rl_;
}

RingBuffer& DualReplay::buffer(Provenance which) {
  return which == Provenance::llm ? llm_ : rl_;
}

const EpisodeRecord* DualReplay::episode(std::uint64_t id) const {
  auto it = episodes_.find(id);
  return it == episodes_.end() ? nullptr : &it->second;
}

void DualReplay::push(GoalTransition t) {
  EpisodeRecord& rec = episodes_[t.episode_id];
  if (rec.closed || t.step_index != static_cast<int>(rec.achieved_goal_next.size())) {
    throw std::invalid_argument("episode " + std::to_string(t.episode_id) +
                                ": steps must be pushed in order");
  }
  rec.achieved_goal_next.push_back(t.achieved_goal_next);
  rec.live += 1;
  rec.closed = t.terminal || t.truncated;
  auto evicted = buffer(t.provenance).push(std::move(t));
  if (evicted) release(*evicted);
}

void DualReplay::release(const GoalTransition& evicted) {
  auto it = episodes_.find(evicted.episode_id);
  if (it == episodes_.end()) return;
  it->second.live -= 1;
  if (it->second.live == 0 && it->second.closed) episodes_.erase(it);
}

std::vector<SampledTransition> DualReplay::sample_with_her(Provenance which, std::size_t n,
                                                           const HerConfig& her,
                                                           const RewardFn& reward_fn,
                                                           Rng& rng) const {
  const RingBuffer& buf = buffer(which);
  if (buf.empty()) {
    throw EmptyBufferError(std::string(which == Provenance::llm ? "LLM" : "RL") +
                           " replay buffer is empty");
  }
  if (her.k < 0) throw std::invalid_argument("HER k must be non-negative");
  const double p_relabel = her.relabel_probability();
  std::uniform_int_distribution<std::size_t> pick(0, buf.size() - 1);
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  std::vector<SampledTransition> out(n);
  for (auto& s : out) {
    s.slot = pick(rng);
    s.transition = buf.slot(s.slot);
    if (p_relabel == 0.0 || !(coin(rng) < p_relabel)) continue;
    const EpisodeRecord& rec = episodes_.at(s.transition.episode_id);
    const int last = static_cast<int>(rec.achieved_goal_next.size()) - 1;
    const int future = std::uniform_int_distribution<int>(s.transition.step_index, last)(rng);
    GoalTransition& t = s.transition;
    t.desired_goal = rec.achieved_goal_next[future];
    t.reward = reward_fn(t.achieved_goal_next, t.desired_goal);
    t.terminal = t.reward == 1.0;
    s.relabeled = true;
    s.goal_source_step = future;
  }
  return out;
}

// --- snapshot ----------------------------------------------------------------

namespace {

void write_transition(std::ostream& out, const GoalTransition& t) {
  out << "transition " << static_cast<int>(t.provenance) << ' ' << t.episode_id << ' '
      << t.step_index << ' ' << t.terminal << ' ' << t.truncated << ' ';
  textio::write_double(out, t.reward);
  out << '\n';
  textio::write_vector(out, "obs", t.observation);
  textio::write_vector(out, "act", t.action);
  textio::write_vector(out, "next", t.next_observation);
  textio::write_vector(out, "goal", t.desired_goal);
  textio::write_vector(out, "achieved", t.achieved_goal_next);
}

GoalTransition read_transition(std::istream& in) {
  GoalTransition t;
  textio::expect(in, "transition");
  const int prov = textio::read_integer<int>(in);
  if (prov != 0 && prov != 1) throw std::runtime_error("bad provenance in replay snapshot");
  t.provenance = static_cast<Provenance>(prov);
  t.episode_id = textio::read_integer<std::uint64_t>(in);
  t.step_index = textio::read_integer<int>(in);
  t.terminal = textio::read_integer<int>(in) != 0;
  t.truncated = textio::read_integer<int>(in) != 0;
  t.reward = textio::read_double(in);
  t.observation = textio::read_vector(in, "obs");
  t.action = textio::read_vector(in, "act");
  t.next_observation = textio::read_vector(in, "next");
  t.desired_goal = textio::read_vector(in, "goal");
  t.achieved_goal_next = textio::read_vector(in, "achieved");
  return t;
}

void write_ring(std::ostream& out, const RingBuffer& buf) {
  // Physical slot order, so a restored buffer samples identically.
  out << "ring " << buf.capacity() << ' ' << buf.size() << ' ' << buf.write_cursor() << '\n';
  for (std::size_t i = 0; i < buf.size(); ++i) write_transition(out, buf.slot(i));
}

}  // namespace

void DualReplay::write(std::ostream& out) const {
  out << "rlingua-replay 1\n";
  write_ring(out, rl_);
  write_ring(out, llm_);
  std::vector<std::uint64_t> ids;
  ids.reserve(episodes_.size());
  for (const auto& [id, rec] : episodes_) ids.push_back(id);
  std::sort(ids.begin(), ids.end());
  out << "episodes " << ids.size() << '\n';
  for (auto id : ids) {
    const EpisodeRecord& rec = episodes_.at(id);
    out << "episode " << id << ' ' << rec.live << ' ' << rec.closed << ' '
        << rec.achieved_goal_next.size() << '\n';
    for (const auto& g : rec.achieved_goal_next) textio::write_vector(out, "g", g);
  }
}

DualReplay DualReplay::read(std::istream& in) {
  textio::expect(in, "rlingua-replay");
  if (textio::read_integer<int>(in) != 1) {
    throw std::runtime_error("unsupported replay snapshot version");
  }
  auto read_ring = [&in]() {
    textio::expect(in, "ring");
    RingBuffer buf(textio::read_integer<std::size_t>(in));
    const auto n = textio::read_integer<std::size_t>(in);
    buf.next_ = textio::read_integer<std::size_t>(in);
    if (n > buf.capacity() || buf.next_ >= buf.capacity()) {
      throw std::runtime_error("corrupt replay snapshot ring header");
    }
    for (std::size_t i = 0; i < n; ++i) buf.slots_.push_back(read_transition(in));
    return buf;
  };
  DualReplay replay(1, 1);
  replay.rl_ = read_ring();
  replay.llm_ = read_ring();
  textio::expect(in, "episodes");
  const auto count = textio::read_integer<std::size_t>(in);
  for (std::size_t e = 0; e < count; ++e) {
    textio::expect(in, "episode");
    const auto id = textio::read_integer<std::uint64_t>(in);
    EpisodeRecord rec;
    rec.live = textio::read_integer<std::size_t>(in);
    rec.closed = textio::read_integer<int>(in) != 0;
    rec.achieved_goal_next.resize(textio::read_integer<std::size_t>(in));
    for (auto& g : rec.achieved_goal_next) g = textio::read_vector(in, "g");
    replay.episodes_.emplace(id, std::move(rec));
  }
  return replay;
}

}  // namespace rlingua
