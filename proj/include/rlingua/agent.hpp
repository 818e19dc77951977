#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "rlingua/adam.hpp"
#include "rlingua/env.hpp"
#include "rlingua/mlp.hpp"
#include "rlingua/replay.hpp"
#include "rlingua/rng.hpp"

namespace rlingua {

struct AgentConfig {
  std::vector<std::size_t> hidden{256, 256};
  double gamma = 0.975;
  double tau = 0.005;
  int policy_delay = 2;
  double lambda_im = 1.0;
  double target_noise_sigma = 0.2;
  double target_noise_clip = 0.5;
  double exploration_noise_sigma = 0.1;
  std::size_t batch_size = 256;
  AdamConfig actor_optimizer{};
  AdamConfig critic_optimizer{};
  double actor_final_layer_scale = 1e-3;
  /// Standardize network inputs with running statistics (see InputNormalizer).
  bool normalize_inputs = false;

  /// Throws std::invalid_argument naming the first bad field.
  void validate() const;
  friend bool operator==(const AgentConfig&, const AgentConfig&) = default;
};

/// Mini-batch in network layout: state = observation || desired goal.
struct TransitionBatch {
  Matrix state;
  Matrix action;
  Matrix next_state;
  std::vector<double> reward;
  std::vector<double> terminal;  // 1 on success-terminal, 0 otherwise (timeouts included)

  std::size_t size() const { return reward.size(); }
};

TransitionBatch make_batch(std::span<const GoalTransition> transitions);
TransitionBatch make_batch(std::span<const SampledTransition> samples);

struct CriticLoss {
  double critic1 = 0.0;
  double critic2 = 0.0;
};

/// The two parts of the actor loss; total = -mean Q + lambda * bc.
struct ActorLossTerms {
  double dpg = 0.0;  // mean Q1(s, pi(s)) over the RL batch
  double bc = 0.0;   // mean squared action error over the LLM batch
  double total = 0.0;
};

struct UpdateStats {
  CriticLoss critic;
  bool actor_updated = false;
  ActorLossTerms actor;
};

/// Running per-dimension mean and variance of network inputs. Maps x to
/// clip((x - mean) / max(std, kStdFloor), +-kClip); the identity until the
/// first observation.
class InputNormalizer {
 public:
  static constexpr double kStdFloor = 1e-2;
  static constexpr double kClip = 5.0;

  InputNormalizer() = default;
  explicit InputNormalizer(std::size_t dim) : mean_(dim, 0.0), m2_(dim, 0.0) {}

  std::size_t dim() const { return mean_.size(); }
  std::uint64_t count() const { return count_; }
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& second_moments() const { return m2_; }
  static InputNormalizer restore(std::uint64_t count, std::vector<double> mean,
                                 std::vector<double> m2) {
    InputNormalizer n;
    n.count_ = count;
    n.mean_ = std::move(mean);
    n.m2_ = std::move(m2);
    return n;
  }
  std::vector<double> stddev() const;

  void observe(std::span<const double> x);
  void apply(std::span<double> x) const;
  void apply(Matrix& rows) const;

  friend bool operator==(const InputNormalizer&, const InputNormalizer&) = default;

 private:
  std::uint64_t count_ = 0;
  std::vector<double> mean_, m2_;
};

/// TD3 actor and twin critics with an optional imitation term in the actor loss.
class Agent {
 public:
  Agent() = default;
  Agent(std::size_t observation_dim, std::size_t goal_dim, std::size_t action_dim,
        AgentConfig config, std::uint64_t seed);

  const AgentConfig& config() const { return config_; }
  std::size_t state_dim() const { return actor_.input_size(); }
  std::size_t action_dim() const { return actor_.output_size(); }

  /// Feeds one collected observation||goal into the input statistics; a no-op
  /// unless normalize_inputs is set.
  void observe_input(const GoalObservation& obs);
  const InputNormalizer& normalizer() const { return normalizer_; }

  /// Deterministic policy output, plus clipped Gaussian noise when exploring.
  /// The observation is normalized first.
  std::vector<double> select_action(const GoalObservation& obs, bool explore, Rng& rng) const;
  std::vector<double> policy(std::span<const double> state) const;

  // The update steps below take batches already in network space; only
  // update() and select_action() apply the normalizer.

  /// Draws target smoothing noise from `rng` (row-major over the batch).
  CriticLoss critic_update(const TransitionBatch& batch, Rng& rng);
  /// Same update with caller-supplied raw noise (batch x action_dim), before clipping.
  CriticLoss critic_update_with_noise(const TransitionBatch& batch, const Matrix& raw_noise);
  /// Critic targets y for `batch` under the current target networks.
  std::vector<double> critic_targets(const TransitionBatch& batch, const Matrix& raw_noise) const;

  /// Actor loss and, when `grad` is non-null, its gradient w.r.t. the actor.
  /// `llm` may be null or empty, in which case the imitation term is zero.
  ActorLossTerms evaluate_actor_loss(const TransitionBatch& rl, const TransitionBatch* llm,
                                     LayerStack* grad) const;
  /// One Adam step on the actor loss; returns the terms before the step.
  ActorLossTerms actor_update(const TransitionBatch& rl, const TransitionBatch* llm);

  void update_targets();

  /// Normalizes both batches, then a critic step every call and an actor and
  /// target step every policy_delay-th call.
  UpdateStats update(const TransitionBatch& rl, const TransitionBatch* llm, Rng& rng);

  const Mlp& actor() const { return actor_; }
  const Mlp& critic1() const { return critic1_; }
  const Mlp& critic2() const { return critic2_; }
  const Mlp& target_actor() const { return target_actor_; }
  const Mlp& target_critic1() const { return target_critic1_; }
  const Mlp& target_critic2() const { return target_critic2_; }
  Mlp& mutable_actor() { return actor_; }
  Mlp& mutable_critic1() { return critic1_; }
  Mlp& mutable_critic2() { return critic2_; }
  Mlp& mutable_target_actor() { return target_actor_; }
  Mlp& mutable_target_critic1() { return target_critic1_; }
  Mlp& mutable_target_critic2() { return target_critic2_; }
  const AdamState& actor_optimizer() const { return actor_opt_; }
  const AdamState& critic1_optimizer() const { return critic1_opt_; }
  const AdamState& critic2_optimizer() const { return critic2_opt_; }

  std::uint64_t update_count() const { return updates_; }
  std::uint64_t actor_update_count() const { return actor_updates_; }

  friend bool operator==(const Agent&, const Agent&) = default;

  void write(std::ostream& out) const;
  static Agent read(std::istream& in);

 private:
  static Matrix join(const Matrix& a, const Matrix& b);

  AgentConfig config_;
  Mlp actor_, critic1_, critic2_;
  Mlp target_actor_, target_critic1_, target_critic2_;
  AdamState actor_opt_, critic1_opt_, critic2_opt_;
  InputNormalizer normalizer_;
  std::uint64_t updates_ = 0;
  std::uint64_t actor_updates_ = 0;
};

/// observation || desired_goal
std::vector<double> actor_input(const GoalObservation& obs);

}  // namespace rlingua
