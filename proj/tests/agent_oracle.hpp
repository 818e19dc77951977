#pragma once

// Per-sample reimplementation of one critic step and one actor step, built
// only from the oracle forward/backprop helpers.

#include <algorithm>

#include "oracles.hpp"
#include "rlingua/agent.hpp"

namespace oracle {

struct Sample {
  Vec state, action, next_state;
  double reward = 0.0;
  double terminal = 0.0;
};

inline rlingua::TransitionBatch to_batch(const std::vector<Sample>& xs) {
  rlingua::TransitionBatch b;
  const std::size_t n = xs.size();
  b.state.resize(n, xs[0].state.size());
  b.next_state.resize(n, xs[0].next_state.size());
  b.action.resize(n, xs[0].action.size());
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(xs[i].state.begin(), xs[i].state.end(), b.state.row(i).begin());
    std::copy(xs[i].next_state.begin(), xs[i].next_state.end(), b.next_state.row(i).begin());
    std::copy(xs[i].action.begin(), xs[i].action.end(), b.action.row(i).begin());
    b.reward.push_back(xs[i].reward);
    b.terminal.push_back(xs[i].terminal);
  }
  return b;
}

struct CriticResult {
  Mlp critic1, critic2;
  Vec targets;
  double loss1 = 0.0, loss2 = 0.0;
};

// `noise` is the already-scaled smoothing noise, one row per sample.
inline CriticResult critic_step(const rlingua::Agent& agent, const std::vector<Sample>& batch,
                                const std::vector<Vec>& noise) {
  const auto& cfg = agent.config();
  const double n = static_cast<double>(batch.size());
  CriticResult out{agent.critic1(), agent.critic2(), {}, 0.0, 0.0};
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Vec next_a = forward(agent.target_actor(), batch[i].next_state);
    for (std::size_t d = 0; d < next_a.size(); ++d) {
      const double eps = std::clamp(noise[i][d], -cfg.target_noise_clip, cfg.target_noise_clip);
      next_a[d] = std::clamp(next_a[d] + eps, -1.0, 1.0);
    }
    const Vec in = concat(batch[i].next_state, next_a);
    const double q1 = forward(agent.target_critic1(), in)[0];
    const double q2 = forward(agent.target_critic2(), in)[0];
    out.targets.push_back(batch[i].reward + (1.0 - batch[i].terminal) * cfg.gamma * std::min(q1, q2));
  }
  for (int c = 0; c < 2; ++c) {
    const Mlp& net = c == 0 ? agent.critic1() : agent.critic2();
    Grad total;
    double loss = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const Vec in = concat(batch[i].state, batch[i].action);
      const double err = forward(net, in)[0] - out.targets[i];
      loss += err * err / n;
      accumulate(total, backprop(net, in, {1.0}), 2.0 * err / n);
    }
    const auto& o = cfg.critic_optimizer;
    first_adam_step(c == 0 ? out.critic1 : out.critic2, total, o.learning_rate, o.beta1, o.beta2,
                    o.epsilon);
    (c == 0 ? out.loss1 : out.loss2) = loss;
  }
  return out;
}

struct ActorResult {
  Mlp actor;
  double dpg = 0.0, bc = 0.0;
  Grad gradient;
};

// Gradient and first Adam step of -mean Q1(s, pi(s)) + lambda * mean ||pi(s) - a||^2.
inline ActorResult actor_step(const rlingua::Agent& agent, const std::vector<Sample>& rl,
                              const std::vector<Sample>& llm) {
  const auto& cfg = agent.config();
  const Mlp& actor = agent.actor();
  ActorResult out{actor, 0.0, 0.0, {}};
  const double n = static_cast<double>(rl.size());
  for (const Sample& s : rl) {
    const Vec a = forward(actor, s.state);
    const Vec in = concat(s.state, a);
    out.dpg += forward(agent.critic1(), in)[0] / n;
    const Grad gq = backprop(agent.critic1(), in, {1.0});
    const Vec dq_da(gq.input.begin() + static_cast<long>(s.state.size()), gq.input.end());
    accumulate(out.gradient, backprop(actor, s.state, dq_da), -1.0 / n);
  }
  const double m = static_cast<double>(llm.size());
  for (const Sample& s : llm) {
    const Vec a = forward(actor, s.state);
    Vec diff(a.size());
    for (std::size_t d = 0; d < a.size(); ++d) {
      diff[d] = a[d] - s.action[d];
      out.bc += diff[d] * diff[d] / m;
    }
    if (cfg.lambda_im != 0.0) {
      accumulate(out.gradient, backprop(actor, s.state, diff), 2.0 * cfg.lambda_im / m);
    }
  }
  const auto& o = cfg.actor_optimizer;
  first_adam_step(out.actor, out.gradient, o.learning_rate, o.beta1, o.beta2, o.epsilon);
  return out;
}

inline std::vector<Sample> random_samples(std::size_t count, std::size_t state_dim,
                                          std::size_t action_dim, rlingua::Rng& rng) {
  std::vector<Sample> xs(count);
  for (auto& s : xs) {
    s.state = random_vec(state_dim, rng);
    s.next_state = random_vec(state_dim, rng);
    s.action = random_vec(action_dim, rng);
    s.reward = (rng() & 1) ? 1.0 : 0.0;
    s.terminal = s.reward;
  }
  return xs;
}

}  // namespace oracle
