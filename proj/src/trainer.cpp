#include "rlingua/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace rlingua {

std::string_view arm_name(Arm arm) {
  switch (arm) {
    case Arm::rlingua: return "rlingua";
    case Arm::td3: return "td3";
    case Arm::controller: return "controller";
  }
  return "unknown";
}

Arm parse_arm(std::string_view name) {
  for (Arm a : {Arm::rlingua, Arm::td3, Arm::controller}) {
    if (arm_name(a) == name) return a;
  }
  throw std::invalid_argument("unknown arm '" + std::string(name) +
                              "' (expected rlingua, td3 or controller)");
}

void TrainerConfig::validate() const {
  auto fail = [](const std::string& what) {
    throw std::invalid_argument("trainer config: " + what);
  };
  if (total_steps == 0) fail("total_steps must be positive");
  if (!(p0 >= 0.0 && p0 <= 1.0)) fail("p0 must lie in [0, 1]");
  if (!(lambda_annl >= 0.0 && lambda_annl <= 1.0)) fail("lambda_annl must lie in [0, 1]");
  if (gradient_steps_per_env_step < 0) fail("gradient_steps_per_env_step must be >= 0");
  if (eval_interval == 0) fail("eval_interval must be positive");
  if (eval_episodes < 1) fail("eval_episodes must be >= 1");
  if (!(ema_factor >= 0.0 && ema_factor < 1.0)) fail("ema_factor must lie in [0, 1)");
  if (!(success_target > 0.0 && success_target <= 1.0)) fail("success_target must lie in (0, 1]");
  if (rl_capacity == 0 || llm_capacity == 0) fail("buffer capacities must be positive");
  if (her.k < 0) fail("her k must be >= 0");
  if (!(controller_noise >= 0.0)) fail("controller_noise must be >= 0");
  agent.validate();
}

double annealed_probability(double p0, double lambda, std::uint64_t k) {
  return p0 * std::pow(lambda, static_cast<double>(k));
}

double Ema::add(double x) {
  value_ = started_ ? factor_ * value_ + (1.0 - factor_) * x : x;
  started_ = true;
  return value_;
}

double evaluate_policy(const Policy& policy, TaskId task, int episodes, std::uint64_t seed) {
  if (episodes < 1) throw std::invalid_argument("evaluate: episodes must be >= 1");
  Rng rng = make_stream(seed, Stream::eval);
  Env env(task);
  int successes = 0;
  for (int e = 0; e < episodes; ++e) {
    GoalObservation obs = env.reset(rng());
    for (;;) {
      const StepResult r = env.step(policy(obs));
      if (r.reward == 1.0) {
        ++successes;
        break;
      }
      if (r.terminal || r.truncated) break;
      obs = r.observation;
    }
  }
  return static_cast<double>(successes) / episodes;
}

// --- trainer -------------------------------------------------------------------

Trainer::Trainer(TrainerConfig config, std::uint64_t seed)
    : config_(std::move(config)),
      seed_(seed),
      env_(config_.task),
      replay_(config_.rl_capacity, config_.llm_capacity),
      mixing_rng_(make_stream(seed, Stream::mixing)),
      action_rng_(make_stream(seed, Stream::action)),
      update_rng_(make_stream(seed, Stream::update)),
      relabel_rng_(make_stream(seed, Stream::relabel)),
      episode_rng_(make_stream(seed, Stream::env)),
      ema_(config_.ema_factor) {
  config_.validate();
  const TaskSpec& spec = env_.spec();
  if (config_.arm != Arm::controller) {
    agent_ = Agent(spec.observation_dim, spec.goal_dim, spec.action_dim, config_.agent, seed);
  }
  if (config_.arm != Arm::td3) {
    ControllerOptions opts;
    opts.noise_sigma = config_.controller_noise;
    opts.seed = seed;
    opts.variant = config_.controller_variant;
    controller_ = make_controller(config_.task, opts);
  }
  reward_fn_ = [&spec](std::span<const double> achieved, std::span<const double> desired) {
    return compute_reward(achieved, desired, spec);
  };
}

double Trainer::p_llm() const {
  return config_.arm == Arm::rlingua ? annealed_probability(config_.p0, config_.lambda_annl, k_)
                                     : 0.0;
}

bool Trainer::finished() const { return k_ >= config_.total_steps; }

void Trainer::start_episode() {
  obs_ = env_.reset(episode_rng_());
  episode_id_ += 1;
  episode_step_ = 0;
  episode_live_ = true;
}

GoalTransition Trainer::collect_step() {
  if (config_.arm == Arm::controller) {
    throw std::logic_error("the controller arm does not collect experience");
  }
  if (!episode_live_) start_episode();
  agent_.observe_input(obs_);
  bool from_controller = false;
  if (config_.arm == Arm::rlingua) {
    from_controller = std::uniform_real_distribution<double>(0.0, 1.0)(mixing_rng_) < p_llm();
  }
  std::vector<double> action;
  if (from_controller) {
    action = controller_->act(obs_);
    llm_actions_ += 1;
  } else if (k_ < config_.warmup_steps) {
    action.resize(env_.spec().action_dim);
    for (double& a : action) a = uniform(action_rng_, -1.0, 1.0);
  } else {
    action = agent_.select_action(obs_, true, action_rng_);
  }

  StepResult r = env_.step(action);
  GoalTransition t;
  t.observation = obs_.observation;
  t.action = std::move(action);
  t.reward = r.reward;
  t.next_observation = r.observation.observation;
  t.terminal = r.terminal;
  t.truncated = r.truncated;
  t.desired_goal = obs_.desired_goal;
  t.achieved_goal_next = r.observation.achieved_goal;
  t.provenance = from_controller ? Provenance::llm : Provenance::rl;
  t.episode_id = episode_id_;
  t.step_index = episode_step_;
  replay_.push(t);

  obs_ = std::move(r.observation);
  episode_step_ += 1;
  if (t.terminal || t.truncated) episode_live_ = false;
  k_ += 1;  // p_llm() now reports p0 * lambda^k
  return t;
}

void Trainer::gradient_step() {
  if (replay_.size(Provenance::rl) == 0) return;
  const std::size_t n = config_.agent.batch_size;
  const auto rl_samples =
      replay_.sample_with_her(Provenance::rl, n, config_.her, reward_fn_, relabel_rng_);
  const TransitionBatch rl = make_batch(rl_samples);
  const auto delay = static_cast<std::uint64_t>(config_.agent.policy_delay);
  const bool actor_fires = (agent_.update_count() + 1) % delay == 0;
  TransitionBatch llm;
  if (actor_fires && replay_.size(Provenance::llm) > 0) {
    llm = make_batch(
        replay_.sample_with_her(Provenance::llm, n, config_.her, reward_fn_, relabel_rng_));
  }
  const UpdateStats stats = agent_.update(rl, llm.size() > 0 ? &llm : nullptr, update_rng_);
  critic_loss_sum_ += 0.5 * (stats.critic.critic1 + stats.critic.critic2);
  critic_steps_ += 1;
  if (stats.actor_updated) {
    dpg_sum_ += stats.actor.dpg;
    bc_sum_ += stats.actor.bc;
    actor_steps_ += 1;
  }
}

double Trainer::evaluate() const {
  const std::uint64_t eval_seed = seed_;
  if (config_.arm == Arm::controller) {
    ControllerOptions opts;
    opts.noise_sigma = config_.controller_noise;
    opts.seed = seed_;
    opts.variant = config_.controller_variant;
    auto ctrl = make_controller(config_.task, opts);
    return evaluate_policy([&](const GoalObservation& o) { return ctrl->act(o); }, config_.task,
                           config_.eval_episodes, eval_seed);
  }
  Rng unused;
  return evaluate_policy(
      [&](const GoalObservation& o) { return agent_.select_action(o, false, unused); },
      config_.task, config_.eval_episodes, eval_seed);
}

const MetricRow& Trainer::record_evaluation() {
  MetricRow row;
  row.env_step = k_;
  row.raw_success = evaluate();
  row.ema_success = ema_.add(row.raw_success);
  row.p_llm = p_llm();
  if (critic_steps_ > 0) row.critic_loss = critic_loss_sum_ / static_cast<double>(critic_steps_);
  if (actor_steps_ > 0) {
    row.dpg_term = dpg_sum_ / static_cast<double>(actor_steps_);
    row.bc_term = bc_sum_ / static_cast<double>(actor_steps_);
  }
  row.rl_buffer = replay_.size(Provenance::rl);
  row.llm_buffer = replay_.size(Provenance::llm);
  critic_loss_sum_ = dpg_sum_ = bc_sum_ = 0.0;
  critic_steps_ = actor_steps_ = 0;
  metrics_.push_back(row);
  return metrics_.back();
}

void Trainer::advance(std::uint64_t max_steps) {
  if (metrics_.empty()) record_evaluation();
  std::uint64_t taken = 0;
  if (config_.arm == Arm::controller) {
    // Nothing learns: stamps follow the same schedule as the learning arms.
    while (taken < max_steps && !finished()) {
      const std::uint64_t next =
          std::min(config_.total_steps, (k_ / config_.eval_interval + 1) * config_.eval_interval);
      taken += next - k_;
      k_ = next;
      MetricRow row = metrics_.back();
      row.env_step = k_;
      row.ema_success = ema_.add(row.raw_success);
      metrics_.push_back(row);
    }
    return;
  }
  while (taken < max_steps && !finished()) {
    collect_step();
    taken += 1;
    if (k_ > config_.warmup_steps) {
      for (int g = 0; g < config_.gradient_steps_per_env_step; ++g) gradient_step();
    }
    if (k_ % config_.eval_interval == 0 || k_ == config_.total_steps) record_evaluation();
  }
}

// --- reporting -------------------------------------------------------------------

EvalReport aggregate_curves(const std::vector<std::vector<MetricRow>>& curves) {
  if (curves.empty()) throw std::invalid_argument("aggregate_curves: no curves");
  EvalReport rep;
  for (const auto& row : curves.front()) rep.env_steps.push_back(row.env_step);
  for (const auto& curve : curves) {
    if (curve.size() != rep.env_steps.size()) {
      throw std::invalid_argument("aggregate_curves: curves have different stamps");
    }
    std::vector<double> ema;
    for (std::size_t i = 0; i < curve.size(); ++i) {
      if (curve[i].env_step != rep.env_steps[i]) {
        throw std::invalid_argument("aggregate_curves: curves have different stamps");
      }
      ema.push_back(curve[i].ema_success);
    }
    rep.per_seed.push_back(std::move(ema));
  }
  for (std::size_t i = 0; i < rep.env_steps.size(); ++i) {
    double sum = 0.0, lo = 1.0, hi = 0.0;
    for (const auto& s : rep.per_seed) {
      sum += s[i];
      lo = std::min(lo, s[i]);
      hi = std::max(hi, s[i]);
    }
    rep.mean.push_back(std::clamp(sum / static_cast<double>(rep.per_seed.size()), lo, hi));
    rep.min.push_back(lo);
    rep.max.push_back(hi);
  }
  return rep;
}

std::optional<std::uint64_t> steps_to_success(const std::vector<MetricRow>& rows, double target) {
  for (const auto& r : rows) {
    if (r.ema_success >= target) return r.env_step;
  }
  return std::nullopt;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

constexpr const char* kColumns =
    "env_step,raw_success,ema_success,p_llm,critic_loss,dpg_term,bc_term,rl_buffer,llm_buffer";

template <class T>
T parse_field(std::string_view field, std::size_t line) {
  T v{};
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw std::runtime_error("line " + std::to_string(line) + ": malformed field '" +
                             std::string(field) + "'");
  }
  return v;
}

}  // namespace

void write_metrics_csv(std::ostream& out, const MetricsHeader& header,
                       const std::vector<MetricRow>& rows) {
  out << "# arm=" << header.arm << "\n# task=" << header.task << "\n# seed=" << header.seed
      << '\n'
      << kColumns << '\n';
  for (const auto& r : rows) {
    out << r.env_step << ',' << format_double(r.raw_success) << ','
        << format_double(r.ema_success) << ',' << format_double(r.p_llm) << ','
        << format_double(r.critic_loss) << ',' << format_double(r.dpg_term) << ','
        << format_double(r.bc_term) << ',' << r.rl_buffer << ',' << r.llm_buffer << '\n';
  }
}

std::vector<MetricRow> read_metrics_csv(std::istream& in, MetricsHeader* header) {
  std::vector<MetricRow> rows;
  std::string line;
  std::size_t line_no = 0;
  bool saw_columns = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (header != nullptr) {
        const auto eq = line.find('=');
        if (eq != std::string::npos) {
          const std::string key = line.substr(2, eq - 2);
          const std::string value = line.substr(eq + 1);
          if (key == "arm") header->arm = value;
          if (key == "task") header->task = value;
          if (key == "seed") header->seed = parse_field<std::uint64_t>(value, line_no);
        }
      }
      continue;
    }
    if (!saw_columns) {
      if (line != kColumns) {
        throw std::runtime_error("line " + std::to_string(line_no) + ": unexpected header '" +
                                 line + "'");
      }
      saw_columns = true;
      continue;
    }
    std::vector<std::string_view> f;
    std::string_view rest(line);
    for (;;) {
      const auto comma = rest.find(',');
      f.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (f.size() != 9) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": expected 9 fields, found " +
                               std::to_string(f.size()));
    }
    MetricRow r;
    r.env_step = parse_field<std::uint64_t>(f[0], line_no);
    r.raw_success = parse_field<double>(f[1], line_no);
    r.ema_success = parse_field<double>(f[2], line_no);
    r.p_llm = parse_field<double>(f[3], line_no);
    r.critic_loss = parse_field<double>(f[4], line_no);
    r.dpg_term = parse_field<double>(f[5], line_no);
    r.bc_term = parse_field<double>(f[6], line_no);
    r.rl_buffer = parse_field<std::size_t>(f[7], line_no);
    r.llm_buffer = parse_field<std::size_t>(f[8], line_no);
    rows.push_back(r);
  }
  if (!saw_columns) throw std::runtime_error("no column header found");
  return rows;
}

}  // namespace rlingua
