#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rlingua/agent.hpp"
#include "rlingua/controllers.hpp"
#include "rlingua/env.hpp"
#include "rlingua/replay.hpp"

namespace rlingua {

enum class Arm { rlingua, td3, controller };

std::string_view arm_name(Arm arm);
/// Throws std::invalid_argument for an unknown name.
Arm parse_arm(std::string_view name);

struct TrainerConfig {
  TaskId task = TaskId::reach;
  Arm arm = Arm::rlingua;
  std::uint64_t total_steps = 50'000;
  double p0 = 0.25;
  double lambda_annl = 0.99995;
  std::uint64_t warmup_steps = 1000;
  int gradient_steps_per_env_step = 1;
  std::uint64_t eval_interval = 2000;
  int eval_episodes = 20;
  double ema_factor = 0.95;
  double success_target = 0.8;  // threshold for steps-to-success in summaries
  std::size_t rl_capacity = 1'000'000;
  std::size_t llm_capacity = 1'000'000;
  HerConfig her{};
  double controller_noise = 0.0;
  PickPlaceVariant controller_variant = PickPlaceVariant::corrected;
  AgentConfig agent{};

  void validate() const;
};

/// p0 * lambda^k, evaluated in closed form.
double annealed_probability(double p0, double lambda, std::uint64_t k);

/// One evaluation stamp.
struct MetricRow {
  std::uint64_t env_step = 0;
  double raw_success = 0.0;
  double ema_success = 0.0;
  double p_llm = 0.0;
  double critic_loss = 0.0;  // mean over critic steps since the previous stamp
  double dpg_term = 0.0;     // mean over actor steps since the previous stamp
  double bc_term = 0.0;
  std::size_t rl_buffer = 0;
  std::size_t llm_buffer = 0;
  friend bool operator==(const MetricRow&, const MetricRow&) = default;
};

/// ema <- factor * ema + (1 - factor) * x, seeded with the first value.
class Ema {
 public:
  explicit Ema(double factor = 0.95) : factor_(factor) {}
  double add(double x);
  double value() const { return value_; }
  bool empty() const { return !started_; }

 private:
  double factor_;
  double value_ = 0.0;
  bool started_ = false;
};

using Policy = std::function<std::vector<double>(const GoalObservation&)>;

/// Fraction of `episodes` noise-free episodes with at least one reward of 1.
/// Episode start states come from a stream seeded by `seed` alone.
double evaluate_policy(const Policy& policy, TaskId task, int episodes, std::uint64_t seed);

/// One seed of one arm. Advancing in chunks lets several seeds share a core.
class Trainer {
 public:
  Trainer(TrainerConfig config, std::uint64_t seed);

  const TrainerConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t env_steps() const { return k_; }
  double p_llm() const;
  bool finished() const;

  /// Runs until `max_steps` more env steps are taken or the budget is used.
  void advance(std::uint64_t max_steps);
  void run() { advance(config_.total_steps); }

  /// One rollout step (Bernoulli mixing, env step, storage, decay).
  GoalTransition collect_step();
  /// Samples batches and performs gradient steps on the agent.
  void gradient_step();
  /// Evaluates the current policy and appends a metrics row.
  const MetricRow& record_evaluation();

  const std::vector<MetricRow>& metrics() const { return metrics_; }
  const Agent& agent() const { return agent_; }
  const DualReplay& replay() const { return replay_; }
  std::uint64_t llm_actions() const { return llm_actions_; }

  /// Current success probability of the arm's policy under evaluation.
  double evaluate() const;

 private:
  void start_episode();

  TrainerConfig config_;
  std::uint64_t seed_;
  Env env_;
  Agent agent_;
  std::unique_ptr<ControllerProvider> controller_;
  DualReplay replay_;
  RewardFn reward_fn_;
  Rng mixing_rng_, action_rng_, update_rng_, relabel_rng_, episode_rng_;

  GoalObservation obs_;
  std::uint64_t episode_id_ = 0;
  int episode_step_ = 0;
  bool episode_live_ = false;
  std::uint64_t k_ = 0;
  std::uint64_t llm_actions_ = 0;

  Ema ema_;
  std::vector<MetricRow> metrics_;
  double critic_loss_sum_ = 0.0, dpg_sum_ = 0.0, bc_sum_ = 0.0;
  std::uint64_t critic_steps_ = 0, actor_steps_ = 0;
};

/// Mean/min/max of EMA success across seeds at shared stamps.
struct EvalReport {
  std::vector<std::uint64_t> env_steps;
  std::vector<double> mean, min, max;
  std::vector<std::vector<double>> per_seed;  // [seed][stamp]
};

/// Throws std::invalid_argument when the curves do not share stamps.
EvalReport aggregate_curves(const std::vector<std::vector<MetricRow>>& curves);

/// First stamp whose EMA reaches `target`.
std::optional<std::uint64_t> steps_to_success(const std::vector<MetricRow>& rows, double target);

struct MetricsHeader {
  std::string arm;
  std::string task;
  std::uint64_t seed = 0;
};

void write_metrics_csv(std::ostream& out, const MetricsHeader& header,
                       const std::vector<MetricRow>& rows);
/// Throws std::runtime_error describing the first malformed line.
std::vector<MetricRow> read_metrics_csv(std::istream& in, MetricsHeader* header = nullptr);

/// Shortest round-trip decimal form of `v`.
std::string format_double(double v);

}  // namespace rlingua
