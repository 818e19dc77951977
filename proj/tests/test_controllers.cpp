#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "rlingua/controllers.hpp"
#include "rlingua/geometry.hpp"

using namespace rlingua;
using std::numbers::pi;

namespace {

// Rotates v by quaternion q (x, y, z, w): v' = q v q*.
Vec3 rotate(const Quaternion& q, const Vec3& v) {
  const double x = q[0], y = q[1], z = q[2], w = q[3];
  const double r[9] = {1 - 2 * (y * y + z * z), 2 * (x * y - z * w),     2 * (x * z + y * w),
                       2 * (x * y + z * w),     1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
                       2 * (x * z - y * w),     2 * (y * z + x * w),     1 - 2 * (x * x + y * y)};
  return {r[0] * v[0] + r[1] * v[1] + r[2] * v[2], r[3] * v[0] + r[4] * v[1] + r[5] * v[2],
          r[6] * v[0] + r[7] * v[1] + r[8] * v[2]};
}

double success_rate(TaskId task, int episodes, ControllerOptions opts) {
  int wins = 0;
  for (int ep = 0; ep < episodes; ++ep) {
    opts.seed = 1000 + ep;
    auto ctrl = make_controller(task, opts);
    Env env(task);
    GoalObservation obs = env.reset(static_cast<std::uint64_t>(ep));
    for (int k = 0; k < env.spec().max_episode_steps; ++k) {
      const StepResult r = env.step(ctrl->act(obs));
      obs = r.observation;
      if (r.reward == 1.0) {
        ++wins;
        break;
      }
    }
  }
  return static_cast<double>(wins) / episodes;
}

}  // namespace

TEST_CASE("is_close uses a closed boundary") {
  const Vec3 a{0.1, 0.2, 0.3};
  CHECK(is_close(a, a, 0.0));
  CHECK(is_close({0, 0, 0}, {0.25, 0, 0}, 0.25));
  CHECK(!is_close({0, 0, 0}, {0.03, 0, 0}, 0.02));
  CHECK(is_close({0, 0, 0}, {0.02, 0, 0}));
}

TEST_CASE("normalize_euler_angle") {
  CHECK(normalize_euler_angle({0, 0, 0}, false) == Vec3{0, 0, 0});
  const Vec3 w = normalize_euler_angle({2 * pi + 0.1, -2 * pi, 3 * pi}, false);
  CHECK(w[0] == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(std::abs(w[1]) < 1e-15);
  CHECK(w[2] == doctest::Approx(pi).epsilon(1e-15));
  const Vec3 s = normalize_euler_angle({0, 0, pi}, true);
  CHECK(std::abs(s[2]) < 1e-15);
  CHECK(normalize_euler_angle({0, 0, 0.75 * pi}, true)[2] == doctest::Approx(-0.25 * pi));

  Rng rng = make_stream(1, 0);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 a{uniform(rng, -20, 20), uniform(rng, -20, 20), uniform(rng, -20, 20)};
    const Vec3 n = normalize_euler_angle(a, true);
    for (int d = 0; d < 2; ++d) {
      CHECK(n[d] > -pi);
      CHECK(n[d] <= pi);
      // Same angle modulo a full turn.
      const double k = (a[d] - n[d]) / (2 * pi);
      CHECK(std::abs(k - std::round(k)) < 1e-9);
    }
    CHECK(n[2] > -pi / 2);
    CHECK(n[2] <= pi / 2);
  }
  CHECK_THROWS_AS(normalize_euler_angle({std::numeric_limits<double>::quiet_NaN(), 0, 0}, false),
                  std::invalid_argument);
}

TEST_CASE("euler_to_quaternion") {
  const Quaternion id = euler_to_quaternion({0, 0, 0});
  CHECK(id == Quaternion{0, 0, 0, 1});
  const Quaternion rx = euler_to_quaternion({pi, 0, 0});
  CHECK(std::abs(std::abs(rx[0]) - 1.0) < 1e-15);
  CHECK(std::abs(rx[1]) < 1e-15);
  CHECK(std::abs(rx[2]) < 1e-15);
  CHECK(std::abs(rx[3]) < 1e-15);
  const Quaternion rz = euler_to_quaternion({0, 0, pi / 2});
  CHECK(rz[2] == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));
  CHECK(rz[3] == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));

  // Rotation-matrix round trip against the extrinsic x-y-z composition.
  Rng rng = make_stream(2, 0);
  for (int i = 0; i < 200; ++i) {
    const Vec3 e{uniform(rng, -pi, pi), uniform(rng, -1.5, 1.5), uniform(rng, -pi, pi)};
    const Quaternion q = euler_to_quaternion(e);
    CHECK(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3] == doctest::Approx(1.0));
    const auto R = geometry::rotation_from_euler(e);
    const Vec3 v{uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1)};
    const Vec3 a = rotate(q, v);
    for (int r = 0; r < 3; ++r) {
      const double b = R[r * 3] * v[0] + R[r * 3 + 1] * v[1] + R[r * 3 + 2] * v[2];
      CHECK(std::abs(a[r] - b) < 1e-12);
    }
  }
}

TEST_CASE("get_action examples") {
  const Pose6 cur{0.1, -0.2, 0.3, 0.0, 0.0, 0.0};
  SUBCASE("target equals current pose") {
    const PoseAction a = get_action(cur, cur, true);
    for (int d = 0; d < 6; ++d) CHECK(a.env_action[d] == 0.0);
    CHECK(a.env_action[6] == 1.0);
    CHECK(a.raw_action[7] == 1.0);
    CHECK(a.raw_action[0] == cur[0]);
    CHECK(a.raw_action[6] == 1.0);  // identity quaternion w
  }
  SUBCASE("far target is clipped to the step limit") {
    Pose6 target = cur;
    target[0] += 0.2;
    const PoseAction a = get_action(cur, target, false);
    CHECK(a.env_action[0] == 1.0);
    CHECK(a.raw_action[0] - cur[0] == doctest::Approx(0.05).epsilon(1e-14));
    CHECK(a.env_action[6] == -1.0);
    CHECK(a.raw_action[7] == 0.0);
  }
  SUBCASE("small displacement and rotation pass through") {
    Pose6 target = cur;
    target[1] += 0.02;
    target[5] += 0.06;
    const PoseAction a = get_action(cur, target, true);
    CHECK(a.env_action[1] == doctest::Approx(0.4));
    CHECK(a.env_action[5] == doctest::Approx(0.4));
    const Quaternion q = euler_to_quaternion({0, 0, 0.06});
    for (int k = 0; k < 4; ++k) CHECK(a.raw_action[3 + k] == doctest::Approx(q[k]));
  }
  SUBCASE("euler mask zeroes a channel") {
    Pose6 target = cur;
    target[3] = 1.0;
    target[4] = 0.05;
    const PoseAction a = get_action(cur, target, true, {}, {0.0, 1.0, 1.0});
    CHECK(a.env_action[3] == 0.0);
    CHECK(a.env_action[4] == doctest::Approx(0.05 / 0.15));
  }
  SUBCASE("NaN is rejected") {
    Pose6 bad = cur;
    bad[2] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(get_action(cur, bad, true), std::invalid_argument);
  }
}

TEST_CASE("reach controller holds still at the goal") {
  Env env(TaskId::reach);
  env.reset(1);
  EnvState s = env.state();
  s.goal_pos = s.gripper_pos;
  env.set_state(s);
  auto ctrl = make_controller(TaskId::reach);
  const auto a = ctrl->act(env.observe());
  CHECK(a == std::vector<double>{0.0, 0.0, 0.0});
}

TEST_CASE("pick-and-place controller opens closed fingers first") {
  Env env(TaskId::pick_and_place);
  env.reset(2);
  EnvState s = env.state();
  s.finger = 0.0;
  s.gripper_pos = {0.1, 0.1, 0.2};
  s.object_pos = {-0.1, -0.1, 0.02};
  env.set_state(s);
  for (auto variant : {PickPlaceVariant::corrected, PickPlaceVariant::first_round}) {
    ControllerOptions opts;
    opts.variant = variant;
    const auto a = make_controller(TaskId::pick_and_place, opts)->act(env.observe());
    CHECK(a[3] > 0.0);
  }
}

TEST_CASE("controller actions are bounded and deterministic") {
  for (TaskId id : all_tasks()) {
    for (double sigma : {0.0, 0.5}) {
      ControllerOptions opts;
      opts.noise_sigma = sigma;
      auto ctrl = make_controller(id, opts);
      Env env(id);
      GoalObservation obs = env.reset(11);
      for (int k = 0; k < 50; ++k) {
        const auto a = ctrl->act(obs);
        CHECK(a.size() == env.spec().action_dim);
        for (double v : a) {
          CHECK(v >= -1.0);
          CHECK(v <= 1.0);
        }
        if (sigma == 0.0) CHECK(ctrl->act(obs) == a);
        obs = env.step(a).observation;
      }
    }
  }
}

TEST_CASE("controller rejects observations of another task") {
  auto ctrl = make_controller(TaskId::push);
  Env env(TaskId::reach);
  CHECK_THROWS_AS(ctrl->act(env.reset(0)), std::invalid_argument);
}

TEST_CASE("noisy controllers restart their noise on reseed") {
  ControllerOptions opts;
  opts.noise_sigma = 0.3;
  opts.seed = 5;
  auto a = make_controller(TaskId::push, opts);
  Env env(TaskId::push);
  const GoalObservation obs = env.reset(3);
  const auto first = a->act(obs);
  CHECK(a->act(obs) != first);
  a->reseed(5);
  CHECK(a->act(obs) == first);
}

TEST_CASE("pick-and-place holds the cube until the target") {
  auto ctrl = make_controller(TaskId::pick_and_place);
  const TaskSpec& spec = task_spec(TaskId::pick_and_place);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Env env(TaskId::pick_and_place);
    GoalObservation obs = env.reset(seed);
    for (int k = 0; k < spec.max_episode_steps; ++k) {
      const auto a = ctrl->act(obs);
      const ObservationView v = view_observation(spec, obs);
      const bool transporting = env.state().attached && v.finger <= 0.04;
      if (transporting && a[3] > 0.0) {
        CHECK(geometry::distance(v.gripper_pos, v.goal_pos) <= 0.02);
      }
      const StepResult r = env.step(a);
      obs = r.observation;
      if (r.terminal) break;
    }
  }
}

TEST_CASE("scripted success rates") {
  CHECK(success_rate(TaskId::reach, 100, {}) == 1.0);
  ControllerOptions noisy;
  noisy.noise_sigma = 0.1;
  CHECK(success_rate(TaskId::reach, 100, noisy) == 1.0);
  CHECK(success_rate(TaskId::pick_and_place_6d, 100, {}) == 1.0);
  CHECK(success_rate(TaskId::push, 100, {}) >= 0.9);
  const double pick = success_rate(TaskId::pick_and_place, 200, noisy);
  CHECK(pick < 1.0);
  CHECK(pick > 0.0);
}

TEST_CASE("registry swaps in alternative controllers") {
  struct Fixed final : ControllerProvider {
    TaskId task() const override { return TaskId::reach; }
    std::vector<double> act(const GoalObservation&) override { return {0.5, 0.5, 0.5}; }
  };
  auto& reg = ControllerRegistry::instance();
  reg.register_factory(TaskId::reach, [](TaskId, const ControllerOptions&) {
    return std::make_unique<Fixed>();
  });
  Env env(TaskId::reach);
  CHECK(make_controller(TaskId::reach)->act(env.reset(0)) == std::vector<double>{0.5, 0.5, 0.5});
  reg.reset_defaults();
  CHECK(make_controller(TaskId::reach)->act(env.reset(0)) != std::vector<double>{0.5, 0.5, 0.5});
}
