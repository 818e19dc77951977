#include "rlingua/env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>

#include "rlingua/geometry.hpp"

namespace rlingua {

namespace ec = env_constants;
using geometry::distance;
using geometry::planar_distance;

// --- registry --------------------------------------------------------------

namespace {

constexpr Box kGripperStart{{-0.05, -0.05, 0.10}, {0.05, 0.05, 0.20}};
constexpr Box kTableObjects{{-0.15, -0.15, ec::cube_rest_z}, {0.15, 0.15, ec::cube_rest_z}};
constexpr Box kNoBox{{0, 0, 0}, {0, 0, 0}};

const TaskSpec kTasks[] = {
    {TaskId::reach, 6, 3, 3, false, false, false, false, kGripperStart, kNoBox,
     Box{{-0.15, -0.15, 0.05}, {0.15, 0.15, 0.35}}, ec::workspace, 0.05, 0.0, 50},
    {TaskId::push, 18, 3, 3, true, false, false, false, kGripperStart, kTableObjects,
     kTableObjects, ec::workspace, 0.05, 0.0, 50},
    // The goal region lies beyond the gripper's reach limit along +x.
    {TaskId::slide, 18, 3, 3, true, false, false, true, kGripperStart,
     Box{{-0.20, -0.10, ec::cube_rest_z}, {-0.10, 0.10, ec::cube_rest_z}},
     Box{{0.15, -0.15, ec::cube_rest_z}, {0.30, 0.15, ec::cube_rest_z}},
     Box{{-0.5, -0.5, 0.0}, {0.05, 0.5, 0.5}}, 0.05, 0.0, 50},
    {TaskId::pick_and_place, 19, 4, 3, true, true, false, false, kGripperStart,
     kTableObjects, Box{{-0.15, -0.15, ec::cube_rest_z}, {0.15, 0.15, 0.20}},
     ec::workspace, 0.05, 0.0, 50},
    {TaskId::pick_and_place_6d, 19, 7, 6, true, true, true, false, kGripperStart,
     kTableObjects, Box{{-0.15, -0.15, ec::cube_rest_z}, {0.15, 0.15, 0.20}},
     ec::workspace, 0.05, 0.1, 50},
};

constexpr double kYawRange = std::numbers::pi / 4.0;

Vec3 add(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }

void append(std::vector<double>& out, const Vec3& v) { out.insert(out.end(), v.begin(), v.end()); }

}  // namespace

std::string_view task_name(TaskId id) {
  switch (id) {
    case TaskId::reach: return "reach";
    case TaskId::push: return "push";
    case TaskId::slide: return "slide";
    case TaskId::pick_and_place: return "pick_and_place";
    case TaskId::pick_and_place_6d: return "pick_and_place_6d";
  }
  return "unknown";
}

TaskId parse_task(std::string_view name) {
  for (TaskId id : all_tasks()) {
    if (task_name(id) == name) return id;
  }
  throw std::invalid_argument("unknown task id '" + std::string(name) + "'");
}

const std::vector<TaskId>& all_tasks() {
  static const std::vector<TaskId> tasks{TaskId::reach, TaskId::push, TaskId::slide,
                                         TaskId::pick_and_place, TaskId::pick_and_place_6d};
  return tasks;
}

const TaskSpec& task_spec(TaskId id) {
  for (const auto& spec : kTasks) {
    if (spec.id == id) return spec;
  }
  throw std::invalid_argument("unknown task id");
}

bool Box::contains(const Vec3& p, double slack) const {
  for (int d = 0; d < 3; ++d) {
    if (p[d] < lo[d] - slack || p[d] > hi[d] + slack) return false;
  }
  return true;
}

Vec3 Box::clamp(const Vec3& p) const {
  return {std::clamp(p[0], lo[0], hi[0]), std::clamp(p[1], lo[1], hi[1]),
          std::clamp(p[2], lo[2], hi[2])};
}

Vec3 Box::sample(Rng& rng) const {
  Vec3 p;
  for (int d = 0; d < 3; ++d) p[d] = lo[d] == hi[d] ? lo[d] : uniform(rng, lo[d], hi[d]);
  return p;
}

// --- reward ----------------------------------------------------------------

double compute_reward(std::span<const double> achieved, std::span<const double> desired,
                      const TaskSpec& task) {
  if (achieved.size() != desired.size() || achieved.size() != task.goal_dim) {
    throw std::invalid_argument("compute_reward: goal length mismatch");
  }
  const double dx = achieved[0] - desired[0];
  const double dy = achieved[1] - desired[1];
  const double dz = achieved[2] - desired[2];
  if (!(std::sqrt(dx * dx + dy * dy + dz * dz) <= task.success_threshold)) return 0.0;
  if (task.six_dof) {
    // The cube looks the same after a half turn about z.
    const double ex = geometry::wrap_angle(achieved[3] - desired[3]);
    const double ey = geometry::wrap_angle(achieved[4] - desired[4]);
    const double ez = geometry::wrap_periodic(achieved[5] - desired[5], std::numbers::pi);
    if (!(std::sqrt(ex * ex + ey * ey + ez * ez) <= task.angular_threshold)) return 0.0;
  }
  return 1.0;
}

// --- environment -----------------------------------------------------------

Env::Env(TaskId task) : spec_(&task_spec(task)) {}

GoalObservation Env::observe() const {
  const EnvState& s = state_;
  const TaskSpec& t = *spec_;
  GoalObservation obs;
  obs.observation.reserve(t.observation_dim);
  switch (t.id) {
    case TaskId::reach:
      append(obs.observation, s.gripper_pos);
      append(obs.observation, s.gripper_vel);
      break;
    case TaskId::push:
    case TaskId::slide:
      append(obs.observation, s.gripper_pos);
      append(obs.observation, s.gripper_vel);
      append(obs.observation, s.object_pos);
      append(obs.observation, s.object_euler);
      append(obs.observation, s.object_vel);
      append(obs.observation, s.object_ang_vel);
      break;
    case TaskId::pick_and_place:
      append(obs.observation, s.gripper_pos);
      append(obs.observation, s.gripper_vel);
      obs.observation.push_back(s.finger);
      append(obs.observation, s.object_pos);
      append(obs.observation, s.object_euler);
      append(obs.observation, s.object_vel);
      append(obs.observation, s.object_ang_vel);
      break;
    case TaskId::pick_and_place_6d:
      append(obs.observation, s.gripper_pos);
      append(obs.observation, s.gripper_euler);
      append(obs.observation, s.gripper_vel);
      obs.observation.push_back(s.finger);
      append(obs.observation, s.object_pos);
      append(obs.observation, s.object_euler);
      append(obs.observation, s.object_vel);
      break;
  }
  if (t.has_object) {
    append(obs.achieved_goal, s.object_pos);
    if (t.six_dof) append(obs.achieved_goal, s.object_euler);
  } else {
    append(obs.achieved_goal, s.gripper_pos);
  }
  append(obs.desired_goal, s.goal_pos);
  if (t.six_dof) append(obs.desired_goal, s.goal_euler);
  return obs;
}

GoalObservation Env::reset(std::uint64_t seed) {
  Rng rng = make_stream(seed, Stream::env);
  const TaskSpec& t = *spec_;
  EnvState s;
  s.gripper_pos = t.gripper_start.sample(rng);
  if (t.has_fingers) s.finger = uniform(rng, 0.0, ec::finger_max);
  if (t.has_object) {
    s.object_pos = t.object_start.sample(rng);
    if (t.six_dof) s.object_euler = {0.0, 0.0, uniform(rng, -kYawRange, kYawRange)};
  }
  // Resample until the episode does not start out solved.
  for (;;) {
    s.goal_pos = t.goal_box.sample(rng);
    if (t.six_dof) s.goal_euler = {0.0, 0.0, uniform(rng, -kYawRange, kYawRange)};
    const Vec3& achieved = t.has_object ? s.object_pos : s.gripper_pos;
    if (distance(achieved, s.goal_pos) > t.success_threshold) break;
  }
  state_ = s;
  return observe();
}

void Env::resolve_contact() {
  EnvState& s = state_;
  if (!spec_->has_object || s.attached) return;
  if (s.gripper_pos[2] >= s.object_pos[2] + ec::contact_clearance) return;
  const double dx = s.object_pos[0] - s.gripper_pos[0];
  const double dy = s.object_pos[1] - s.gripper_pos[1];
  const double d = std::hypot(dx, dy);
  if (spec_->has_fingers && s.finger >= ec::finger_closed && d <= ec::grasp_radius) {
    return;  // the cube still fits between the jaws
  }
  if (d >= ec::contact_radius) return;
  const double ux = d > 0.0 ? dx / d : 1.0;
  const double uy = d > 0.0 ? dy / d : 0.0;
  Vec3 pushed{s.gripper_pos[0] + ux * ec::contact_radius,
              s.gripper_pos[1] + uy * ec::contact_radius, s.object_pos[2]};
  pushed = ec::workspace.clamp(pushed);
  if (spec_->sliding) {
    s.slide_velocity[0] += pushed[0] - s.object_pos[0];
    s.slide_velocity[1] += pushed[1] - s.object_pos[1];
  }
  s.object_pos = pushed;
}

void Env::move_gripper(const Vec3& target) {
  const Vec3 start = state_.gripper_pos;
  for (int k = 1; k <= ec::move_substeps; ++k) {
    if (k == ec::move_substeps) {
      state_.gripper_pos = target;
    } else {
      const double f = static_cast<double>(k) / ec::move_substeps;
      for (int d = 0; d < 3; ++d) {
        state_.gripper_pos[d] = start[d] + (target[d] - start[d]) * f;
      }
    }
    resolve_contact();
  }
}

StepResult Env::step(std::span<const double> action) {
  const TaskSpec& t = *spec_;
  if (action.size() != t.action_dim) {
    throw std::invalid_argument("action has " + std::to_string(action.size()) +
                                " components, task " + std::string(task_name(t.id)) +
                                " expects " + std::to_string(t.action_dim));
  }
  for (double a : action) {
    if (std::isnan(a)) throw std::invalid_argument("action contains NaN");
  }
  auto component = [&](std::size_t i) { return std::clamp(action[i], -1.0, 1.0); };

  EnvState& s = state_;
  const Vec3 prev_gripper = s.gripper_pos;
  const Vec3 prev_object = s.object_pos;
  const double prev_finger = s.finger;

  if (t.sliding) {
    Vec3 drifted = add(s.object_pos, s.slide_velocity);
    const Vec3 clamped = ec::workspace.clamp(drifted);
    if (clamped != drifted) s.slide_velocity = {0.0, 0.0, 0.0};
    s.object_pos = clamped;
    for (double& v : s.slide_velocity) v *= ec::slide_decay;
    if (geometry::norm(s.slide_velocity) < ec::slide_rest_speed) {
      s.slide_velocity = {0.0, 0.0, 0.0};
    }
  }

  if (t.six_dof) {
    for (int d = 0; d < 3; ++d) {
      s.gripper_euler[d] =
          geometry::wrap_angle(s.gripper_euler[d] + ec::max_rotation * component(3 + d));
    }
  }

  Vec3 target = add(prev_gripper, {ec::max_displacement * component(0),
                                   ec::max_displacement * component(1),
                                   ec::max_displacement * component(2)});
  target = t.gripper_reach.clamp(target);
  if (s.attached) target[2] = std::max(target[2], ec::cube_rest_z);

  const Vec3 velocity_before_contact = s.slide_velocity;
  if (t.sliding) s.slide_velocity = {0.0, 0.0, 0.0};
  move_gripper(target);
  if (t.sliding) {
    // A fresh contact replaces the momentum; otherwise the drift persists.
    if (s.slide_velocity == Vec3{0.0, 0.0, 0.0}) s.slide_velocity = velocity_before_contact;
  }

  if (t.has_fingers) {
    const std::size_t idx = t.six_dof ? 6 : 3;
    s.finger = std::clamp(s.finger + ec::finger_max_move * component(idx), 0.0, ec::finger_max);
    if (!s.attached && prev_finger >= ec::finger_closed && s.finger < ec::finger_closed &&
        distance(s.gripper_pos, s.object_pos) < ec::grasp_radius) {
      s.attached = true;
      s.grasp_rotation =
          geometry::multiply(geometry::transpose(geometry::rotation_from_euler(s.gripper_euler)),
                             geometry::rotation_from_euler(s.object_euler));
    } else if (s.attached && s.finger > ec::finger_open) {
      s.attached = false;
    }
  }

  if (t.has_object) {
    if (s.attached) {
      s.object_pos = s.gripper_pos;
      if (t.six_dof) {
        s.object_euler = geometry::euler_from_rotation(geometry::multiply(
            geometry::rotation_from_euler(s.gripper_euler), s.grasp_rotation));
      }
    } else if (s.object_pos[2] != ec::cube_rest_z) {
      s.object_pos[2] = ec::cube_rest_z;  // released cubes drop onto the table
    }
    s.object_vel = sub(s.object_pos, prev_object);
  }
  s.gripper_vel = sub(s.gripper_pos, prev_gripper);
  s.step_index += 1;

  StepResult result;
  result.observation = observe();
  result.reward =
      compute_reward(result.observation.achieved_goal, result.observation.desired_goal, t);
  result.terminal = result.reward == 1.0;
  result.truncated = s.step_index >= t.max_episode_steps;
  return result;
}

// --- views and dumps -------------------------------------------------------

ObservationView view_observation(const TaskSpec& task, const GoalObservation& obs) {
  if (obs.observation.size() != task.observation_dim ||
      obs.desired_goal.size() != task.goal_dim) {
    throw std::invalid_argument("observation does not belong to task " +
                                std::string(task_name(task.id)));
  }
  const auto& o = obs.observation;
  auto v3 = [&](std::size_t i) { return Vec3{o[i], o[i + 1], o[i + 2]}; };
  ObservationView v;
  switch (task.id) {
    case TaskId::reach:
      v.gripper_pos = v3(0);
      v.gripper_vel = v3(3);
      break;
    case TaskId::push:
    case TaskId::slide:
      v.gripper_pos = v3(0);
      v.gripper_vel = v3(3);
      v.object_pos = v3(6);
      v.object_euler = v3(9);
      v.object_vel = v3(12);
      break;
    case TaskId::pick_and_place:
      v.gripper_pos = v3(0);
      v.gripper_vel = v3(3);
      v.finger = o[6];
      v.object_pos = v3(7);
      v.object_euler = v3(10);
      v.object_vel = v3(13);
      break;
    case TaskId::pick_and_place_6d:
      v.gripper_pos = v3(0);
      v.gripper_euler = v3(3);
      v.gripper_vel = v3(6);
      v.finger = o[9];
      v.object_pos = v3(10);
      v.object_euler = v3(13);
      v.object_vel = v3(16);
      break;
  }
  const auto& g = obs.desired_goal;
  v.goal_pos = {g[0], g[1], g[2]};
  if (task.six_dof) v.goal_euler = {g[3], g[4], g[5]};
  return v;
}

void write_trajectory_record(std::ostream& out, int step, const EnvState& s,
                             std::span<const double> action, double reward) {
  auto vec = [&](const char* key, std::span<const double> v) {
    out << ' ' << key << '=';
    for (std::size_t i = 0; i < v.size(); ++i) out << (i ? "," : "") << v[i];
  };
  out << "step=" << step;
  vec("gripper", s.gripper_pos);
  vec("gripper_euler", s.gripper_euler);
  out << " finger=" << s.finger;
  vec("object", s.object_pos);
  vec("object_euler", s.object_euler);
  out << " attached=" << (s.attached ? 1 : 0);
  vec("goal", s.goal_pos);
  vec("action", action);
  out << " reward=" << reward << '\n';
}

}  // namespace rlingua
