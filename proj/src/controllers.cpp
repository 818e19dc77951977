#include "rlingua/controllers.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "rlingua/geometry.hpp"

namespace rlingua {

using geometry::distance;

namespace {

constexpr double kHoverHeight = 0.08;       // above the table, clear of the cube
constexpr double kApproachOffset = 0.04;    // behind the cube on the push line
constexpr double kPushHeight = env_constants::cube_rest_z;

Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }

double clip_unit(double v) { return std::clamp(v, -1.0, 1.0); }

// Normalized per-axis displacement toward `target`.
std::array<double, 3> displacement_command(const Vec3& from, const Vec3& to, double limit) {
  return {clip_unit((to[0] - from[0]) / limit), clip_unit((to[1] - from[1]) / limit),
          clip_unit((to[2] - from[2]) / limit)};
}

// Straight-line move of at most `limit` metres, as in the generated controllers.
std::array<double, 3> straight_move(const Vec3& from, const Vec3& to, double limit) {
  const Vec3 delta = sub(to, from);
  const double dist = geometry::norm(delta);
  if (dist == 0.0) return {0.0, 0.0, 0.0};
  const double step = std::min(dist, limit);
  return {clip_unit(delta[0] / dist * step / limit), clip_unit(delta[1] / dist * step / limit),
          clip_unit(delta[2] / dist * step / limit)};
}

}  // namespace

// --- primitives ------------------------------------------------------------

bool is_close(const Vec3& a, const Vec3& b, double tol) { return distance(a, b) <= tol; }

Vec3 normalize_euler_angle(const Vec3& angles, bool symmetric_z) {
  for (double a : angles) {
    if (std::isnan(a)) throw std::invalid_argument("normalize_euler_angle: NaN angle");
  }
  Vec3 out{geometry::wrap_angle(angles[0]), geometry::wrap_angle(angles[1]),
           geometry::wrap_angle(angles[2])};
  if (symmetric_z) out[2] = geometry::wrap_periodic(out[2], std::numbers::pi);
  return out;
}

Quaternion euler_to_quaternion(const Vec3& e) {
  const double cr = std::cos(0.5 * e[0]), sr = std::sin(0.5 * e[0]);
  const double cp = std::cos(0.5 * e[1]), sp = std::sin(0.5 * e[1]);
  const double cy = std::cos(0.5 * e[2]), sy = std::sin(0.5 * e[2]);
  return {sr * cp * cy - cr * sp * sy, cr * sp * cy + sr * cp * sy,
          cr * cp * sy - sr * sp * cy, cr * cp * cy + sr * sp * sy};
}

PoseAction get_action(const Pose6& cur, const Pose6& target, bool gripper_open,
                      const ControllerConstants& limits, const Vec3& euler_mask,
                      bool symmetric_z) {
  for (double v : cur) {
    if (std::isnan(v)) throw std::invalid_argument("get_action: NaN in current pose");
  }
  for (double v : target) {
    if (std::isnan(v)) throw std::invalid_argument("get_action: NaN in target pose");
  }
  const double pos_limit = limits.max_move_distance;
  const double angle_limit = limits.max_move_distance * limits.euler_multiplier;
  const Vec3 euler_change = normalize_euler_angle(
      {target[3] - cur[3], target[4] - cur[4], target[5] - cur[5]}, symmetric_z);

  PoseAction out;
  Vec3 next_euler;
  for (int d = 0; d < 3; ++d) {
    // Normalize first so physical = normalized * limit holds exactly.
    const double move = clip_unit((target[d] - cur[d]) / pos_limit);
    const double turn = clip_unit(euler_change[d] * euler_mask[d] / angle_limit);
    out.env_action[d] = move;
    out.env_action[3 + d] = turn;
    out.raw_action[d] = cur[d] + move * pos_limit;
    next_euler[d] = cur[3 + d] + turn * angle_limit;
  }
  const Quaternion q = euler_to_quaternion(next_euler);
  std::copy(q.begin(), q.end(), out.raw_action.begin() + 3);
  out.env_action[6] = gripper_open ? 1.0 : -1.0;
  out.raw_action[7] = gripper_open ? 1.0 : 0.0;
  return out;
}

// --- scripted controllers --------------------------------------------------

RuleController::RuleController(TaskId task, ControllerOptions options)
    : task_(task), options_(options), rng_(make_stream(options.seed, Stream::controller)) {
  const auto& c = options_.constants;
  if (!(c.close_finger < c.open_finger) || c.max_move_distance <= 0 ||
      c.proximal_distance <= 0 || c.close_finger <= 0 || c.finger_max_move <= 0 ||
      c.euler_multiplier <= 0) {
    throw std::invalid_argument("invalid controller constants");
  }
  if (options_.noise_sigma < 0) throw std::invalid_argument("negative controller noise");
}

void RuleController::reseed(std::uint64_t seed) {
  rng_ = make_stream(seed, Stream::controller);
}

std::vector<double> RuleController::act(const GoalObservation& obs) {
  std::vector<double> action = nominal_action(obs);
  if (options_.noise_sigma > 0.0) {
    for (double& a : action) a = clip_unit(a + options_.noise_sigma * standard_normal(rng_));
  }
  return action;
}

std::vector<double> RuleController::nominal_action(const GoalObservation& obs) const {
  const ObservationView v = view_observation(task_spec(task_), obs);
  switch (task_) {
    case TaskId::reach: return reach(v);
    case TaskId::push: return push(v, false);
    case TaskId::slide: return push(v, true);
    case TaskId::pick_and_place: return pick_and_place(v);
    case TaskId::pick_and_place_6d: return pick_and_place_6d(v);
  }
  throw std::invalid_argument("no scripted controller for this task");
}

std::vector<double> RuleController::reach(const ObservationView& v) const {
  const auto d = displacement_command(v.gripper_pos, v.goal_pos, options_.constants.max_move_distance);
  return {d[0], d[1], d[2]};
}

// Phase machine: hover above a point behind the cube, descend, then drive
// along the cube->goal line. The slide variant meters a single shove so the
// cube's momentum carries it the remaining distance, then waits.
std::vector<double> RuleController::push(const ObservationView& v, bool sliding) const {
  const auto& c = options_.constants;
  const double gx = v.goal_pos[0] - v.object_pos[0];
  const double gy = v.goal_pos[1] - v.object_pos[1];
  const double remaining = std::hypot(gx, gy);
  if (remaining < 1e-9) return {0.0, 0.0, 0.0};
  if (sliding && geometry::norm(v.object_vel) > env_constants::slide_rest_speed) {
    return {0.0, 0.0, 0.0};
  }
  const double ux = gx / remaining, uy = gy / remaining;
  const Vec3 approach{v.object_pos[0] - kApproachOffset * ux,
                      v.object_pos[1] - kApproachOffset * uy, kPushHeight};
  const Vec3 hover{approach[0], approach[1], kHoverHeight};
  const double off_line = geometry::planar_distance(v.gripper_pos, approach);

  Vec3 target;
  if (off_line <= c.proximal_distance) {
    if (v.gripper_pos[2] <= kPushHeight + 0.5 * c.proximal_distance) {
      double shove = remaining;
      if (sliding) {
        // Contact displacement d travels a further d / (1 - decay).
        const double gap = std::max(
            0.0, geometry::planar_distance(v.gripper_pos, v.object_pos) - env_constants::contact_radius);
        shove = gap + remaining * (1.0 - env_constants::slide_decay) /
                          (2.0 - env_constants::slide_decay);
      }
      target = {v.gripper_pos[0] + shove * ux, v.gripper_pos[1] + shove * uy, kPushHeight};
    } else {
      target = approach;
    }
  } else if (v.gripper_pos[2] < kHoverHeight - c.proximal_distance &&
             geometry::planar_distance(v.gripper_pos, v.object_pos) < 2.0 * kApproachOffset) {
    target = {v.gripper_pos[0], v.gripper_pos[1], kHoverHeight};  // lift clear first
  } else {
    target = hover;
  }
  const auto d = displacement_command(v.gripper_pos, target, c.max_move_distance);
  return {d[0], d[1], d[2]};
}

// Transcription of the generated pick-and-place controller: straight-line
// moves capped at the step limit, finger changes of the full allowed size,
// clipped so the finger distance stays in [0, 0.1].
std::vector<double> RuleController::pick_and_place(const ObservationView& v) const {
  const auto& c = options_.constants;
  const double to_object = distance(v.gripper_pos, v.object_pos);
  const double to_target = distance(v.gripper_pos, v.goal_pos);
  std::array<double, 3> move{0.0, 0.0, 0.0};
  double finger_change = 0.0;

  if (options_.variant == PickPlaceVariant::first_round) {
    if (v.finger < c.open_finger) {
      finger_change = c.finger_max_move;
    } else if (to_object <= c.proximal_distance) {
      if (v.finger > c.close_finger) {
        finger_change = -c.finger_max_move;
      } else {
        move = straight_move(v.gripper_pos, v.goal_pos, c.max_move_distance);
      }
    } else {
      move = straight_move(v.gripper_pos, v.object_pos, c.max_move_distance);
    }
  } else {
    const bool grasped = v.finger <= c.close_finger && to_object <= c.proximal_distance;
    if (v.finger < c.open_finger && !grasped) {
      finger_change = c.finger_max_move;
    } else if (to_object <= c.proximal_distance && !grasped) {
      if (v.finger > c.close_finger) finger_change = -c.finger_max_move;
    } else if (grasped) {
      if (to_target <= c.proximal_distance) {
        finger_change = c.finger_max_move;  // release at the target
      } else {
        move = straight_move(v.gripper_pos, v.goal_pos, c.max_move_distance);
      }
    } else {
      move = straight_move(v.gripper_pos, v.object_pos, c.max_move_distance);
    }
  }
  finger_change =
      std::clamp(finger_change + v.finger, 0.0, env_constants::finger_max) - v.finger;
  return {move[0], move[1], move[2], clip_unit(finger_change / c.finger_max_move)};
}

// Template-style controller built on get_action: hover above the cube with
// matching yaw, descend open, close, carry to the goal pose, release.
std::vector<double> RuleController::pick_and_place_6d(const ObservationView& v) const {
  const auto& c = options_.constants;
  const Vec3 mask{1.0, 1.0, 1.0};
  const Pose6 gripper{v.gripper_pos[0], v.gripper_pos[1], v.gripper_pos[2],
                      v.gripper_euler[0], v.gripper_euler[1], v.gripper_euler[2]};
  const Pose6 cube{v.object_pos[0], v.object_pos[1], v.object_pos[2],
                   0.0, 0.0, v.object_euler[2]};
  const Pose6 above{cube[0], cube[1], kHoverHeight, 0.0, 0.0, cube[5]};
  const Pose6 goal{v.goal_pos[0], v.goal_pos[1], v.goal_pos[2],
                   v.goal_euler[0], v.goal_euler[1], v.goal_euler[2]};

  auto aligned = [&](const Pose6& target) {
    const Vec3 diff = normalize_euler_angle(
        {gripper[3] - target[3], gripper[4] - target[4], gripper[5] - target[5]}, true);
    return is_close({diff[0] * mask[0], diff[1] * mask[1], diff[2] * mask[2]}, {0, 0, 0},
                    c.proximal_distance * c.euler_multiplier);
  };
  const bool closed = v.finger < c.close_finger;
  const bool at_cube = is_close(v.gripper_pos, v.object_pos, c.proximal_distance);
  const bool holding = closed && at_cube;
  const bool at_goal = is_close(v.gripper_pos, v.goal_pos, c.proximal_distance) && aligned(goal);
  const bool over_cube =
      geometry::planar_distance(v.gripper_pos, v.object_pos) <= c.proximal_distance &&
      aligned(cube) && v.finger >= c.open_finger;

  PoseAction pa;
  if (holding && at_goal) {
    pa = get_action(gripper, goal, true, c, mask);
  } else if (holding) {
    pa = get_action(gripper, goal, false, c, mask);
  } else if (at_cube && aligned(cube) && !closed) {
    pa = get_action(gripper, cube, false, c, mask);
  } else if (over_cube) {
    pa = get_action(gripper, cube, true, c, mask);
  } else {
    pa = get_action(gripper, above, true, c, mask);
  }
  return {pa.env_action.begin(), pa.env_action.end()};
}

// --- registry --------------------------------------------------------------

namespace {

std::unique_ptr<ControllerProvider> scripted(TaskId task, const ControllerOptions& options) {
  return std::make_unique<RuleController>(task, options);
}

}  // namespace

ControllerRegistry::ControllerRegistry() { reset_defaults(); }

ControllerRegistry& ControllerRegistry::instance() {
  static ControllerRegistry registry;
  return registry;
}

void ControllerRegistry::reset_defaults() {
  factories_.clear();
  for (TaskId task : all_tasks()) factories_.emplace_back(task, scripted);
}

void ControllerRegistry::register_factory(TaskId task, ControllerFactory factory) {
  for (auto& [id, f] : factories_) {
    if (id == task) {
      f = std::move(factory);
      return;
    }
  }
  factories_.emplace_back(task, std::move(factory));
}

std::unique_ptr<ControllerProvider> ControllerRegistry::make(
    TaskId task, const ControllerOptions& options) const {
  for (const auto& [id, f] : factories_) {
    if (id == task) return f(task, options);
  }
  throw std::invalid_argument("no controller registered for task '" +
                              std::string(task_name(task)) + "'");
}

std::unique_ptr<ControllerProvider> make_controller(TaskId task, const ControllerOptions& options) {
  return ControllerRegistry::instance().make(task, options);
}

}  // namespace rlingua
