#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "rlingua/env.hpp"
#include "rlingua/rng.hpp"

namespace rlingua {

struct ControllerConstants {
  double max_move_distance = 0.05;
  double proximal_distance = 0.02;
  double close_finger = 0.04;
  double open_finger = 0.06;
  double finger_max_move = 0.05;
  // Angular limit = max_move_distance * euler_multiplier = 0.15 rad.
  double euler_multiplier = 3.0;
};

using Pose6 = std::array<double, 6>;     // position, extrinsic x-y-z Euler angles
using Quaternion = std::array<double, 4>;  // (x, y, z, w)

/// True iff the Euclidean distance between a and b is at most tol.
bool is_close(const Vec3& a, const Vec3& b, double tol = ControllerConstants{}.proximal_distance);

/// Wraps each angle into (-pi, pi]; with `symmetric_z` the z angle is further
/// wrapped modulo pi into (-pi/2, pi/2], modelling the two-finger gripper's
/// half-turn symmetry. Throws std::invalid_argument on NaN.
Vec3 normalize_euler_angle(const Vec3& angles, bool symmetric_z);

/// Unit quaternion of the extrinsic x-y-z rotation.
Quaternion euler_to_quaternion(const Vec3& angles);

struct PoseAction {
  /// Normalized command in [-1, 1]: displacement (3), Euler change (3),
  /// open channel (+1 open, -1 closed).
  std::array<double, 7> env_action{};
  /// Absolute next position (3), quaternion of the next orientation (4),
  /// open flag in {0, 1}.
  std::array<double, 8> raw_action{};
};

PoseAction get_action(const Pose6& cur_pose, const Pose6& target_pose, bool gripper_open,
                      const ControllerConstants& limits = {},
                      const Vec3& euler_mask = {1.0, 1.0, 1.0}, bool symmetric_z = true);

/// Anything that maps observations of one task to normalized actions; the
/// learned policy and scripted (or externally generated) controllers share it.
class ControllerProvider {
 public:
  virtual ~ControllerProvider() = default;
  virtual TaskId task() const = 0;
  virtual std::vector<double> act(const GoalObservation& obs) = 0;
  /// Restarts any internal randomness; stateless controllers ignore it.
  virtual void reseed(std::uint64_t /*seed*/) {}
};

enum class PickPlaceVariant {
  corrected,    // second round, tracks whether the cube is held
  first_round,  // reopens the fingers whenever they are not wide open
};

struct ControllerOptions {
  ControllerConstants constants;
  double noise_sigma = 0.0;  // Gaussian noise on the normalized action
  std::uint64_t seed = 0;
  PickPlaceVariant variant = PickPlaceVariant::corrected;
};

class RuleController final : public ControllerProvider {
 public:
  RuleController(TaskId task, ControllerOptions options);

  TaskId task() const override { return task_; }
  std::vector<double> act(const GoalObservation& obs) override;
  void reseed(std::uint64_t seed) override;

  /// The noise-free action.
  std::vector<double> nominal_action(const GoalObservation& obs) const;
  const ControllerOptions& options() const { return options_; }

 private:
  std::vector<double> reach(const ObservationView& v) const;
  std::vector<double> push(const ObservationView& v, bool sliding) const;
  std::vector<double> pick_and_place(const ObservationView& v) const;
  std::vector<double> pick_and_place_6d(const ObservationView& v) const;

  TaskId task_;
  ControllerOptions options_;
  Rng rng_;
};

using ControllerFactory =
    std::function<std::unique_ptr<ControllerProvider>(TaskId, const ControllerOptions&)>;

/// Controllers by task id. Scripted controllers are registered by default;
/// `register_factory` swaps in an alternative (for instance generated code).
class ControllerRegistry {
 public:
  static ControllerRegistry& instance();

  void register_factory(TaskId task, ControllerFactory factory);
  void reset_defaults();
  std::unique_ptr<ControllerProvider> make(TaskId task, const ControllerOptions& options) const;

 private:
  ControllerRegistry();
  std::vector<std::pair<TaskId, ControllerFactory>> factories_;
};

std::unique_ptr<ControllerProvider> make_controller(TaskId task,
                                                    const ControllerOptions& options = {});

}  // namespace rlingua
