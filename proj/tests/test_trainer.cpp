#include <doctest.h>

#include <cmath>
#include <sstream>

#include "rlingua/trainer.hpp"

using namespace rlingua;

namespace {

TrainerConfig tiny(TaskId task, Arm arm) {
  TrainerConfig c;
  c.task = task;
  c.arm = arm;
  c.total_steps = 300;
  c.warmup_steps = 100;
  c.eval_interval = 100;
  c.eval_episodes = 5;
  c.agent.hidden = {16, 16};
  c.agent.batch_size = 16;
  return c;
}

}  // namespace

TEST_CASE("closed-form annealing") {
  CHECK(annealed_probability(0.25, 0.99995, 20000) == doctest::Approx(0.09197).epsilon(1e-4));
  CHECK(annealed_probability(0.25, 0.999999, 100000) == doctest::Approx(0.2262).epsilon(1e-4));
  CHECK(annealed_probability(0.25, 0.99995, 0) == 0.25);
}

TEST_CASE("p_llm after k collect steps equals the repeated product") {
  TrainerConfig c = tiny(TaskId::push, Arm::rlingua);
  c.warmup_steps = 1'000'000;  // random actions; no gradient work needed here
  c.total_steps = 5000;
  Trainer t(c, 1);
  long double p = 0.25L;
  for (int k = 1; k <= 5000; ++k) {
    t.collect_step();
    p *= static_cast<long double>(c.lambda_annl);
    if (k % 500 == 0) {
      CHECK(std::abs(t.p_llm() - static_cast<double>(p)) <= 1e-12 * static_cast<double>(p));
    }
  }
}

TEST_CASE("mixing extremes and binomial statistics") {
  SUBCASE("p = 0 stores only RL transitions") {
    TrainerConfig c = tiny(TaskId::reach, Arm::rlingua);
    c.p0 = 0.0;
    c.warmup_steps = 1'000'000;
    Trainer t(c, 2);
    for (int k = 0; k < 500; ++k) CHECK(t.collect_step().provenance == Provenance::rl);
  }
  SUBCASE("p = 1 stores only controller transitions") {
    TrainerConfig c = tiny(TaskId::reach, Arm::rlingua);
    c.p0 = 1.0;
    c.lambda_annl = 1.0;
    Trainer t(c, 3);
    for (int k = 0; k < 500; ++k) CHECK(t.collect_step().provenance == Provenance::llm);
  }
  SUBCASE("p = 0.25 without decay") {
    TrainerConfig c = tiny(TaskId::reach, Arm::rlingua);
    c.lambda_annl = 1.0;
    c.warmup_steps = 1'000'000;
    c.total_steps = 100'000;
    Trainer t(c, 4);
    const int n = 100'000;
    for (int k = 0; k < n; ++k) t.collect_step();
    const double sigma = std::sqrt(n * 0.25 * 0.75);
    CHECK(std::abs(static_cast<double>(t.llm_actions()) - 0.25 * n) <= 3 * sigma);
    CHECK(t.replay().size(Provenance::llm) == t.llm_actions());
    CHECK(t.replay().size(Provenance::rl) + t.replay().size(Provenance::llm) == n);
  }
}

TEST_CASE("smoke run conserves transitions and stamps the schedule") {
  Trainer t(tiny(TaskId::push, Arm::rlingua), 5);
  t.run();
  CHECK(t.finished());
  CHECK(t.env_steps() == 300);
  CHECK(t.replay().size(Provenance::rl) + t.replay().size(Provenance::llm) == 300);
  std::vector<std::uint64_t> stamps;
  for (const auto& r : t.metrics()) stamps.push_back(r.env_step);
  CHECK(stamps == std::vector<std::uint64_t>{0, 100, 200, 300});
  CHECK(t.agent().update_count() == 200);
  CHECK(t.agent().actor_update_count() == 100);
  for (const auto& r : t.metrics()) {
    CHECK(r.raw_success >= 0.0);
    CHECK(r.raw_success <= 1.0);
    CHECK(r.p_llm == doctest::Approx(annealed_probability(0.25, 0.99995, r.env_step)));
  }
}

TEST_CASE("chunked advancing equals one run") {
  Trainer a(tiny(TaskId::reach, Arm::td3), 6), b(tiny(TaskId::reach, Arm::td3), 6);
  a.run();
  while (!b.finished()) b.advance(37);
  CHECK(a.metrics() == b.metrics());
  CHECK(a.agent() == b.agent());
}

TEST_CASE("training is deterministic per seed and differs across seeds") {
  Trainer a(tiny(TaskId::push, Arm::rlingua), 7), b(tiny(TaskId::push, Arm::rlingua), 7),
      c(tiny(TaskId::push, Arm::rlingua), 8);
  a.run();
  b.run();
  c.run();
  CHECK(a.metrics() == b.metrics());
  CHECK(a.agent() == b.agent());
  CHECK(!(a.agent() == c.agent()));
}

TEST_CASE("controller arm evaluates the scripted policy") {
  TrainerConfig c = tiny(TaskId::reach, Arm::controller);
  c.eval_episodes = 100;
  Trainer t(c, 9);
  t.run();
  for (const auto& r : t.metrics()) {
    CHECK(r.raw_success == 1.0);
    CHECK(r.ema_success == 1.0);
  }
  CHECK_THROWS_AS(t.collect_step(), std::logic_error);
}

TEST_CASE("evaluation") {
  auto ctrl = make_controller(TaskId::reach);
  const Policy p = [&](const GoalObservation& o) { return ctrl->act(o); };
  CHECK(evaluate_policy(p, TaskId::reach, 100, 3) == 1.0);
  const Policy idle = [](const GoalObservation&) { return std::vector<double>{0, 0, 0}; };
  CHECK(evaluate_policy(idle, TaskId::reach, 50, 3) == 0.0);
  Trainer t(tiny(TaskId::push, Arm::td3), 10);
  CHECK(t.evaluate() == t.evaluate());
}

TEST_CASE("EMA") {
  Ema e(0.95);
  CHECK(e.empty());
  for (int i = 0; i < 50; ++i) CHECK(e.add(0.3) == 0.3);
  Ema f(0.95);
  f.add(0.0);
  CHECK(f.add(1.0) == doctest::Approx(0.05));
  CHECK(f.add(1.0) == doctest::Approx(0.05 * 0.95 + 0.05));
}

TEST_CASE("curve aggregation") {
  auto curve = [](std::vector<double> ema) {
    std::vector<MetricRow> rows;
    for (std::size_t i = 0; i < ema.size(); ++i) {
      MetricRow r;
      r.env_step = 100 * i;
      r.ema_success = ema[i];
      rows.push_back(r);
    }
    return rows;
  };
  const EvalReport one = aggregate_curves({curve({0.1, 0.5, 0.9})});
  CHECK(one.min == one.mean);
  CHECK(one.max == one.mean);

  const EvalReport four = aggregate_curves(
      {curve({0.0, 0.2, 0.8}), curve({0.0, 0.6, 0.9}), curve({0.0, 0.4, 1.0}), curve({0.0, 0.0, 0.7})});
  CHECK(four.min == std::vector<double>{0.0, 0.0, 0.7});
  CHECK(four.max == std::vector<double>{0.0, 0.6, 1.0});
  CHECK(four.mean[1] == doctest::Approx(0.3));
  CHECK(four.env_steps == std::vector<std::uint64_t>{0, 100, 200});
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(four.min[i] <= four.mean[i]);
    CHECK(four.mean[i] <= four.max[i]);
  }
  CHECK_THROWS_AS(aggregate_curves({curve({0.1, 0.2}), curve({0.1})}), std::invalid_argument);
  CHECK(steps_to_success(curve({0.1, 0.79, 0.8}), 0.8) == 200u);
  CHECK(!steps_to_success(curve({0.1, 0.2}), 0.8));
}

TEST_CASE("metrics CSV round trip and diagnostics") {
  Trainer t(tiny(TaskId::push, Arm::rlingua), 11);
  t.run();
  std::stringstream ss;
  write_metrics_csv(ss, {"rlingua", "push", 11}, t.metrics());
  MetricsHeader h;
  CHECK(read_metrics_csv(ss, &h) == t.metrics());
  CHECK(h.arm == "rlingua");
  CHECK(h.task == "push");
  CHECK(h.seed == 11);

  std::stringstream bad(
      "# arm=td3\n# task=reach\n# seed=1\n"
      "env_step,raw_success,ema_success,p_llm,critic_loss,dpg_term,bc_term,rl_buffer,llm_buffer\n"
      "0,0,0,0,0,0,0,0,0\n100,0,zero,0,0,0,0,1,0\n");
  try {
    read_metrics_csv(bad);
    FAIL("malformed row accepted");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("line 6") != std::string::npos);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1e-8) == "1e-08");
}

TEST_CASE("trainer config validation") {
  TrainerConfig c;
  c.p0 = 1.5;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = TrainerConfig{};
  c.lambda_annl = 1.01;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = TrainerConfig{};
  c.eval_interval = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  CHECK_THROWS_AS(parse_arm("sac"), std::invalid_argument);
  CHECK(parse_arm("td3") == Arm::td3);
}
