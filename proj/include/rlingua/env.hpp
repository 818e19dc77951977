#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rlingua/rng.hpp"

namespace rlingua {

using Vec3 = std::array<double, 3>;

enum class TaskId { reach, push, slide, pick_and_place, pick_and_place_6d };

std::string_view task_name(TaskId id);
/// Throws std::invalid_argument for an unknown id.
TaskId parse_task(std::string_view name);
const std::vector<TaskId>& all_tasks();

struct Box {
  Vec3 lo;
  Vec3 hi;
  bool contains(const Vec3& p, double slack = 0.0) const;
  Vec3 clamp(const Vec3& p) const;
  Vec3 sample(Rng& rng) const;
};

/// Kinematic constants shared by every task.
namespace env_constants {
inline constexpr double max_displacement = 0.05;  // m per step and axis
inline constexpr double max_rotation = 0.15;      // rad per step and axis
inline constexpr double finger_max = 0.1;
inline constexpr double finger_max_move = 0.05;
inline constexpr double finger_closed = 0.04;
inline constexpr double finger_open = 0.06;
inline constexpr double grasp_radius = 0.02;
inline constexpr double cube_side = 0.04;
inline constexpr double cube_rest_z = 0.02;
inline constexpr double contact_radius = 0.03;
inline constexpr double contact_clearance = 0.03;  // above cube centre
inline constexpr double slide_decay = 0.9;
inline constexpr double slide_rest_speed = 1e-4;
inline constexpr int move_substeps = 5;
inline const Box workspace{{-0.5, -0.5, 0.0}, {0.5, 0.5, 0.5}};
}  // namespace env_constants

struct TaskSpec {
  TaskId id;
  std::size_t observation_dim;
  std::size_t action_dim;
  std::size_t goal_dim;
  bool has_object;
  bool has_fingers;
  bool six_dof;
  bool sliding;
  Box gripper_start;
  Box object_start;
  Box goal_box;
  Box gripper_reach;  // workspace minus any task-specific reach limit
  double success_threshold;  // m
  double angular_threshold;  // rad, 6-DoF only
  int max_episode_steps;
};

const TaskSpec& task_spec(TaskId id);

struct GoalObservation {
  std::vector<double> observation;
  std::vector<double> achieved_goal;
  std::vector<double> desired_goal;
  friend bool operator==(const GoalObservation&, const GoalObservation&) = default;
};

struct EnvState {
  Vec3 gripper_pos{};
  Vec3 gripper_euler{};
  Vec3 gripper_vel{};
  double finger = 0.0;
  Vec3 object_pos{};
  Vec3 object_euler{};
  Vec3 object_vel{};
  Vec3 object_ang_vel{};
  Vec3 slide_velocity{};  // persistent momentum (Slide only)
  bool attached = false;
  std::array<double, 9> grasp_rotation{1, 0, 0, 0, 1, 0, 0, 0, 1};  // object in gripper frame
  Vec3 goal_pos{};
  Vec3 goal_euler{};
  int step_index = 0;
  friend bool operator==(const EnvState&, const EnvState&) = default;
};

struct StepResult {
  GoalObservation observation;
  double reward = 0.0;
  bool terminal = false;
  bool truncated = false;
};

/// 1 when achieved matches desired within the task thresholds, else 0.
/// Pure, so it doubles as the relabeling reward function.
double compute_reward(std::span<const double> achieved,
                      std::span<const double> desired, const TaskSpec& task);

/// Deterministic goal-conditioned manipulation environment.
class Env {
 public:
  explicit Env(TaskId task);

  const TaskSpec& spec() const { return *spec_; }
  TaskId task() const { return spec_->id; }

  GoalObservation reset(std::uint64_t seed);
  StepResult step(std::span<const double> action);

  const EnvState& state() const { return state_; }
  /// Overwrites the full state; for scripted scenarios and tests.
  void set_state(const EnvState& state) { state_ = state; }
  GoalObservation observe() const;

 private:
  void move_gripper(const Vec3& target);
  void resolve_contact();

  const TaskSpec* spec_;
  EnvState state_;
};

/// Line-delimited dump of one episode: `step=<k> state=... action=... reward=<r>`.
void write_trajectory_record(std::ostream& out, int step, const EnvState& state,
                             std::span<const double> action, double reward);

/// Named views into a task's observation layout.
struct ObservationView {
  Vec3 gripper_pos{};
  Vec3 gripper_euler{};
  Vec3 gripper_vel{};
  double finger = 0.0;
  Vec3 object_pos{};
  Vec3 object_euler{};
  Vec3 object_vel{};
  Vec3 goal_pos{};
  Vec3 goal_euler{};
};

ObservationView view_observation(const TaskSpec& task, const GoalObservation& obs);

}  // namespace rlingua
