#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rlingua/trainer.hpp"

namespace rlingua {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything one invocation runs: one task, one arm, several seeds.
struct ExperimentConfig {
  TrainerConfig trainer;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4};
  std::string out_dir;  // empty: the caller picks a default
};

/// Discount and annealing rate for a task: panda-style tasks use
/// 0.975 / 0.99995, the 6-DoF task 0.96 / 0.999999.
double default_gamma(TaskId task);
double default_lambda_annl(TaskId task);

/// Sectioned key = value text:
///
///   [experiment]  task arm total_steps seeds out_dir
///   [trainer]     p0 lambda_annl warmup_steps gradient_steps_per_env_step
///                 eval_interval eval_episodes ema_factor success_target
///                 rl_capacity llm_capacity controller_noise controller_variant
///   [agent]       hidden gamma tau policy_delay lambda_im target_noise_sigma
///                 target_noise_clip exploration_noise_sigma batch_size
///                 actor_lr critic_lr adam_beta1 adam_beta2 adam_epsilon
///                 actor_final_layer_scale
///   [her]         k
///
/// '#' and ';' start comments. Unknown sections or keys, duplicates and
/// malformed values throw ConfigError. gamma and lambda_annl default per task
/// when absent.
class ConfigBuilder {
 public:
  /// Parses `text` on top of whatever has been set so far.
  void parse(std::string_view text, std::string_view origin = "config");
  /// `section.key=value`.
  void apply_override(std::string_view assignment);
  void set(std::string_view section, std::string_view key, std::string_view value);

  /// Defaults merged with everything set; validated.
  ExperimentConfig build() const;

 private:
  struct Entry {
    std::string section, key, value;
  };
  std::vector<Entry> entries_;
};

ExperimentConfig parse_config(std::string_view text);

/// Canonical text of a fully resolved config: every key, fixed order,
/// shortest round-trip numbers.
std::string serialize_config(const ExperimentConfig& config);

std::string_view variant_name(PickPlaceVariant v);

}  // namespace rlingua
