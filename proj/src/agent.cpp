#include "rlingua/agent.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "textio.hpp"

namespace rlingua {

void AgentConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("agent config: " + what); };
  if (hidden.empty()) fail("hidden must list at least one layer");
  for (auto h : hidden) {
    if (h == 0) fail("hidden layer widths must be positive");
  }
  if (!(gamma >= 0.0 && gamma <= 1.0)) fail("gamma must lie in [0, 1]");
  if (!(tau >= 0.0 && tau <= 1.0)) fail("tau must lie in [0, 1]");
  if (policy_delay < 1) fail("policy_delay must be >= 1");
  if (!(lambda_im >= 0.0)) fail("lambda_im must be >= 0");
  if (!(target_noise_sigma >= 0.0)) fail("target_noise_sigma must be >= 0");
  if (!(target_noise_clip >= 0.0)) fail("target_noise_clip must be >= 0");
  if (!(exploration_noise_sigma >= 0.0)) fail("exploration_noise_sigma must be >= 0");
  if (batch_size == 0) fail("batch_size must be positive");
  for (const AdamConfig* a : {&actor_optimizer, &critic_optimizer}) {
    if (!(a->learning_rate > 0.0)) fail("learning rates must be positive");
    if (!(a->beta1 >= 0.0 && a->beta1 < 1.0 && a->beta2 >= 0.0 && a->beta2 < 1.0)) {
      fail("Adam betas must lie in [0, 1)");
    }
    if (!(a->epsilon > 0.0)) fail("Adam epsilon must be positive");
  }
  if (!(actor_final_layer_scale > 0.0)) fail("actor_final_layer_scale must be positive");
}

std::vector<double> actor_input(const GoalObservation& obs) {
  std::vector<double> x(obs.observation);
  x.insert(x.end(), obs.desired_goal.begin(), obs.desired_goal.end());
  return x;
}

namespace {

template <class Get>
TransitionBatch build_batch(std::size_t n, Get get) {
  if (n == 0) return {};
  const GoalTransition& first = get(0);
  const std::size_t sd = first.observation.size() + first.desired_goal.size();
  const std::size_t ad = first.action.size();
  TransitionBatch b;
  b.state.resize(n, sd);
  b.next_state.resize(n, sd);
  b.action.resize(n, ad);
  b.reward.resize(n);
  b.terminal.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const GoalTransition& t = get(i);
    if (t.observation.size() + t.desired_goal.size() != sd || t.action.size() != ad ||
        t.next_observation.size() != t.observation.size()) {
      throw std::invalid_argument("transitions in one batch must share dimensions");
    }
    auto s = b.state.row(i);
    auto ns = b.next_state.row(i);
    std::copy(t.observation.begin(), t.observation.end(), s.begin());
    std::copy(t.desired_goal.begin(), t.desired_goal.end(), s.begin() + t.observation.size());
    std::copy(t.next_observation.begin(), t.next_observation.end(), ns.begin());
    std::copy(t.desired_goal.begin(), t.desired_goal.end(),
              ns.begin() + t.next_observation.size());
    std::copy(t.action.begin(), t.action.end(), b.action.row(i).begin());
    b.reward[i] = t.reward;
    b.terminal[i] = t.terminal ? 1.0 : 0.0;
  }
  return b;
}

std::vector<std::size_t> sizes_with(std::size_t in, const std::vector<std::size_t>& hidden,
                                    std::size_t out) {
  std::vector<std::size_t> s{in};
  s.insert(s.end(), hidden.begin(), hidden.end());
  s.push_back(out);
  return s;
}

}  // namespace

TransitionBatch make_batch(std::span<const GoalTransition> transitions) {
  return build_batch(transitions.size(), [&](std::size_t i) -> const GoalTransition& {
    return transitions[i];
  });
}

TransitionBatch make_batch(std::span<const SampledTransition> samples) {
  return build_batch(samples.size(), [&](std::size_t i) -> const GoalTransition& {
    return samples[i].transition;
  });
}

std::vector<double> InputNormalizer::stddev() const {
  std::vector<double> sd(mean_.size(), 1.0);
  if (count_ == 0) return sd;
  for (std::size_t i = 0; i < sd.size(); ++i) {
    sd[i] = std::max(std::sqrt(m2_[i] / static_cast<double>(count_)), kStdFloor);
  }
  return sd;
}

void InputNormalizer::observe(std::span<const double> x) {
  if (x.size() != mean_.size()) throw std::invalid_argument("normalizer input has the wrong size");
  count_ += 1;
  const double n = static_cast<double>(count_);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double delta = x[i] - mean_[i];
    mean_[i] += delta / n;
    m2_[i] += delta * (x[i] - mean_[i]);
  }
}

void InputNormalizer::apply(std::span<double> x) const {
  if (count_ == 0) return;
  if (x.size() != mean_.size()) throw std::invalid_argument("normalizer input has the wrong size");
  const std::vector<double> sd = stddev();
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = std::clamp((x[i] - mean_[i]) / sd[i], -kClip, kClip);
  }
}

void InputNormalizer::apply(Matrix& rows) const {
  if (count_ == 0) return;
  for (std::size_t r = 0; r < rows.rows; ++r) apply(rows.row(r));
}

Agent::Agent(std::size_t observation_dim, std::size_t goal_dim, std::size_t action_dim,
             AgentConfig config, std::uint64_t seed)
    : config_(std::move(config)) {
  config_.validate();
  if (observation_dim == 0 || goal_dim == 0 || action_dim == 0) {
    throw std::invalid_argument("agent dimensions must be positive");
  }
  const std::size_t sd = observation_dim + goal_dim;
  Rng rng = make_stream(seed, Stream::init);
  actor_ = Mlp::initialized(sizes_with(sd, config_.hidden, action_dim),
                            OutputActivation::bounded_tanh,
                            std::vector<double>(action_dim, 1.0), rng,
                            config_.actor_final_layer_scale);
  const auto critic_sizes = sizes_with(sd + action_dim, config_.hidden, 1);
  critic1_ = Mlp::initialized(critic_sizes, OutputActivation::linear, {}, rng);
  critic2_ = Mlp::initialized(critic_sizes, OutputActivation::linear, {}, rng);
  target_actor_ = actor_;
  target_critic1_ = critic1_;
  target_critic2_ = critic2_;
  actor_opt_ = AdamState(actor_, config_.actor_optimizer);
  critic1_opt_ = AdamState(critic1_, config_.critic_optimizer);
  critic2_opt_ = AdamState(critic2_, config_.critic_optimizer);
  normalizer_ = InputNormalizer(sd);
}

void Agent::observe_input(const GoalObservation& obs) {
  if (config_.normalize_inputs) normalizer_.observe(actor_input(obs));
}

std::vector<double> Agent::policy(std::span<const double> state) const {
  return actor_.forward(state);
}

std::vector<double> Agent::select_action(const GoalObservation& obs, bool explore,
                                         Rng& rng) const {
  std::vector<double> x = actor_input(obs);
  if (x.size() != state_dim()) {
    throw std::invalid_argument("observation||goal has " + std::to_string(x.size()) +
                                " entries, actor expects " + std::to_string(state_dim()));
  }
  normalizer_.apply(x);
  std::vector<double> a = actor_.forward(x);
  if (explore && config_.exploration_noise_sigma > 0.0) {
    for (double& v : a) {
      v = std::clamp(v + config_.exploration_noise_sigma * standard_normal(rng), -1.0, 1.0);
    }
  }
  return a;
}

Matrix Agent::join(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows, a.cols + b.cols);
  for (std::size_t r = 0; r < a.rows; ++r) {
    auto dst = out.row(r);
    auto ra = a.row(r);
    auto rb = b.row(r);
    std::copy(ra.begin(), ra.end(), dst.begin());
    std::copy(rb.begin(), rb.end(), dst.begin() + a.cols);
  }
  return out;
}

std::vector<double> Agent::critic_targets(const TransitionBatch& batch,
                                          const Matrix& raw_noise) const {
  const std::size_t n = batch.size();
  if (raw_noise.rows != n || raw_noise.cols != action_dim()) {
    throw std::invalid_argument("target noise shape mismatch");
  }
  ForwardCache cache;
  target_actor_.forward_batch(batch.next_state, cache);
  Matrix next_action = std::move(cache.output);
  const double c = config_.target_noise_clip;
  for (std::size_t j = 0; j < next_action.data.size(); ++j) {
    const double eps = std::clamp(raw_noise.data[j], -c, c);
    next_action.data[j] = std::clamp(next_action.data[j] + eps, -1.0, 1.0);
  }
  const Matrix next_input = join(batch.next_state, next_action);
  ForwardCache c1, c2;
  target_critic1_.forward_batch(next_input, c1);
  target_critic2_.forward_batch(next_input, c2);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double q = std::min(c1.output.data[i], c2.output.data[i]);
    y[i] = batch.reward[i] + (1.0 - batch.terminal[i]) * config_.gamma * q;
  }
  return y;
}

CriticLoss Agent::critic_update(const TransitionBatch& batch, Rng& rng) {
  Matrix noise(batch.size(), action_dim());
  if (config_.target_noise_sigma > 0.0) {
    for (double& v : noise.data) v = config_.target_noise_sigma * standard_normal(rng);
  }
  return critic_update_with_noise(batch, noise);
}

CriticLoss Agent::critic_update_with_noise(const TransitionBatch& batch, const Matrix& raw_noise) {
  const std::size_t n = batch.size();
  if (n == 0) throw std::invalid_argument("critic_update: empty batch");
  if (batch.state.cols != state_dim() || batch.action.cols != action_dim()) {
    throw std::invalid_argument("critic_update: batch dimensions do not match the agent");
  }
  const std::vector<double> y = critic_targets(batch, raw_noise);
  const Matrix input = join(batch.state, batch.action);
  CriticLoss loss;
  auto step = [&](Mlp& critic, AdamState& opt, double& out_loss) {
    ForwardCache cache;
    critic.forward_batch(input, cache);
    Matrix dq(n, 1);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double err = cache.output.data[i] - y[i];
      sum += err * err;
      dq.data[i] = 2.0 * err / static_cast<double>(n);
    }
    out_loss = sum / static_cast<double>(n);
    LayerStack grad = critic.zeros_like();
    critic.backward_batch(cache, dq, &grad, nullptr);
    adam_step(critic, grad, opt);
  };
  step(critic1_, critic1_opt_, loss.critic1);
  step(critic2_, critic2_opt_, loss.critic2);
  return loss;
}

ActorLossTerms Agent::evaluate_actor_loss(const TransitionBatch& rl, const TransitionBatch* llm,
                                          LayerStack* grad) const {
  const std::size_t n = rl.size();
  if (n == 0) throw std::invalid_argument("actor_update: empty RL batch");
  if (rl.state.cols != state_dim()) {
    throw std::invalid_argument("actor_update: batch dimensions do not match the agent");
  }
  ActorLossTerms terms;

  // Deterministic policy gradient part: -mean Q1(s, pi(s)).
  ForwardCache actor_cache;
  actor_.forward_batch(rl.state, actor_cache);
  const Matrix critic_in = join(rl.state, actor_cache.output);
  ForwardCache critic_cache;
  critic1_.forward_batch(critic_in, critic_cache);
  double q_sum = 0.0;
  for (double q : critic_cache.output.data) q_sum += q;
  terms.dpg = q_sum / static_cast<double>(n);
  if (grad != nullptr) {
    Matrix dq(n, 1, -1.0 / static_cast<double>(n));
    Matrix d_input;
    critic1_.backward_batch(critic_cache, dq, nullptr, &d_input);
    Matrix d_action(n, action_dim());
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t a = 0; a < action_dim(); ++a) {
        d_action(i, a) = d_input(i, state_dim() + a);
      }
    }
    actor_.backward_batch(actor_cache, d_action, grad, nullptr);
  }

  // Imitation part: lambda * mean ||pi(s) - a||^2 over the LLM batch.
  if (llm != nullptr && llm->size() > 0) {
    const std::size_t m = llm->size();
    if (llm->state.cols != state_dim() || llm->action.cols != action_dim()) {
      throw std::invalid_argument("actor_update: LLM batch dimensions do not match the agent");
    }
    ForwardCache bc_cache;
    actor_.forward_batch(llm->state, bc_cache);
    Matrix d_action(m, action_dim());
    double sq = 0.0;
    for (std::size_t j = 0; j < d_action.data.size(); ++j) {
      const double diff = bc_cache.output.data[j] - llm->action.data[j];
      sq += diff * diff;
      d_action.data[j] = 2.0 * config_.lambda_im * diff / static_cast<double>(m);
    }
    terms.bc = sq / static_cast<double>(m);
    if (grad != nullptr && config_.lambda_im != 0.0) {
      actor_.backward_batch(bc_cache, d_action, grad, nullptr);
    }
  }
  terms.total = -terms.dpg + config_.lambda_im * terms.bc;
  return terms;
}

ActorLossTerms Agent::actor_update(const TransitionBatch& rl, const TransitionBatch* llm) {
  LayerStack grad = actor_.zeros_like();
  const ActorLossTerms terms = evaluate_actor_loss(rl, llm, &grad);
  adam_step(actor_, grad, actor_opt_);
  actor_updates_ += 1;
  return terms;
}

void Agent::update_targets() {
  polyak_update(target_actor_, actor_, config_.tau);
  polyak_update(target_critic1_, critic1_, config_.tau);
  polyak_update(target_critic2_, critic2_, config_.tau);
}

UpdateStats Agent::update(const TransitionBatch& rl_raw, const TransitionBatch* llm_raw,
                          Rng& rng) {
  TransitionBatch rl = rl_raw;
  normalizer_.apply(rl.state);
  normalizer_.apply(rl.next_state);
  TransitionBatch llm;
  if (llm_raw) {
    llm = *llm_raw;
    normalizer_.apply(llm.state);
    normalizer_.apply(llm.next_state);
  }
  UpdateStats stats;
  stats.critic = critic_update(rl, rng);
  updates_ += 1;
  if (updates_ % static_cast<std::uint64_t>(config_.policy_delay) == 0) {
    stats.actor = actor_update(rl, llm_raw ? &llm : nullptr);
    stats.actor_updated = true;
    update_targets();
  }
  return stats;
}

// --- checkpoint ----------------------------------------------------------------

void Agent::write(std::ostream& out) const {
  out << "rlingua-agent 2\n";
  out << "hidden " << config_.hidden.size();
  for (auto h : config_.hidden) out << ' ' << h;
  out << "\ndelay " << config_.policy_delay << "\nbatch " << config_.batch_size
      << "\nnormalize " << (config_.normalize_inputs ? 1 : 0) << '\n';
  const double reals[] = {config_.gamma,
                          config_.tau,
                          config_.lambda_im,
                          config_.target_noise_sigma,
                          config_.target_noise_clip,
                          config_.exploration_noise_sigma,
                          config_.actor_final_layer_scale,
                          config_.actor_optimizer.learning_rate,
                          config_.actor_optimizer.beta1,
                          config_.actor_optimizer.beta2,
                          config_.actor_optimizer.epsilon,
                          config_.critic_optimizer.learning_rate,
                          config_.critic_optimizer.beta1,
                          config_.critic_optimizer.beta2,
                          config_.critic_optimizer.epsilon};
  textio::write_vector(out, "reals", reals);
  out << "counters " << updates_ << ' ' << actor_updates_ << '\n';
  out << "normalizer " << normalizer_.count() << '\n';
  textio::write_vector(out, "mean", normalizer_.mean());
  textio::write_vector(out, "m2", normalizer_.second_moments());
  for (const Mlp* net : {&actor_, &critic1_, &critic2_, &target_actor_, &target_critic1_,
                         &target_critic2_}) {
    write_mlp(out, *net);
  }
  for (const AdamState* opt : {&actor_opt_, &critic1_opt_, &critic2_opt_}) write_adam(out, *opt);
}

Agent Agent::read(std::istream& in) {
  textio::expect(in, "rlingua-agent");
  if (textio::read_integer<int>(in) != 2) {
    throw std::runtime_error("unsupported agent checkpoint version");
  }
  Agent agent;
  AgentConfig& c = agent.config_;
  textio::expect(in, "hidden");
  c.hidden.resize(textio::read_integer<std::size_t>(in));
  for (auto& h : c.hidden) h = textio::read_integer<std::size_t>(in);
  textio::expect(in, "delay");
  c.policy_delay = textio::read_integer<int>(in);
  textio::expect(in, "batch");
  c.batch_size = textio::read_integer<std::size_t>(in);
  textio::expect(in, "normalize");
  c.normalize_inputs = textio::read_integer<int>(in) != 0;
  const auto r = textio::read_vector(in, "reals");
  if (r.size() != 15) throw std::runtime_error("agent checkpoint: bad reals block");
  c.gamma = r[0];
  c.tau = r[1];
  c.lambda_im = r[2];
  c.target_noise_sigma = r[3];
  c.target_noise_clip = r[4];
  c.exploration_noise_sigma = r[5];
  c.actor_final_layer_scale = r[6];
  c.actor_optimizer = {r[7], r[8], r[9], r[10]};
  c.critic_optimizer = {r[11], r[12], r[13], r[14]};
  c.validate();
  textio::expect(in, "counters");
  agent.updates_ = textio::read_integer<std::uint64_t>(in);
  agent.actor_updates_ = textio::read_integer<std::uint64_t>(in);
  textio::expect(in, "normalizer");
  const auto count = textio::read_integer<std::uint64_t>(in);
  auto mean = textio::read_vector(in, "mean");
  auto m2 = textio::read_vector(in, "m2");
  if (mean.size() != m2.size()) throw std::runtime_error("agent checkpoint: bad normalizer block");
  agent.normalizer_ = InputNormalizer::restore(count, std::move(mean), std::move(m2));
  for (Mlp* net : {&agent.actor_, &agent.critic1_, &agent.critic2_, &agent.target_actor_,
                   &agent.target_critic1_, &agent.target_critic2_}) {
    *net = read_mlp(in);
  }
  for (AdamState* opt : {&agent.actor_opt_, &agent.critic1_opt_, &agent.critic2_opt_}) {
    *opt = read_adam(in);
  }
  return agent;
}

}  // namespace rlingua
