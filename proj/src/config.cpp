#include "rlingua/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

namespace rlingua {

double default_gamma(TaskId task) { return task == TaskId::pick_and_place_6d ? 0.96 : 0.975; }

double default_lambda_annl(TaskId task) {
  return task == TaskId::pick_and_place_6d ? 0.999999 : 0.99995;
}

std::string_view variant_name(PickPlaceVariant v) {
  return v == PickPlaceVariant::first_round ? "first_round" : "corrected";
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string where(std::string_view section, std::string_view key) {
  return std::string(section) + "." + std::string(key);
}

std::uint64_t to_uint(std::string_view v, std::string_view name) {
  std::uint64_t out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || r.ec != std::errc() || r.ptr != v.data() + v.size()) {
    throw ConfigError(std::string(name) + ": expected a non-negative integer, got '" +
                      std::string(v) + "'");
  }
  return out;
}

double to_real(std::string_view v, std::string_view name) {
  double out = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || r.ec != std::errc() || r.ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError(std::string(name) + ": expected a finite number, got '" + std::string(v) +
                      "'");
  }
  return out;
}

std::vector<std::uint64_t> to_uint_list(std::string_view v, std::string_view name) {
  std::vector<std::uint64_t> out;
  std::string_view rest = v;
  for (;;) {
    const auto comma = rest.find(',');
    out.push_back(to_uint(trim(rest.substr(0, comma)), name));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return out;
}

template <class T>
std::string join(const std::vector<T>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + std::to_string(xs[i]);
  return s;
}

using Setter = std::function<void(ExperimentConfig&, std::string_view, std::string_view)>;
using Getter = std::function<std::string(const ExperimentConfig&)>;

struct Key {
  const char* section;
  const char* key;
  Setter set;
  Getter get;
};

template <class Field>
Key real_key(const char* section, const char* key, Field field) {
  return {section, key,
          [field](ExperimentConfig& c, std::string_view v, std::string_view n) {
            field(c) = to_real(v, n);
          },
          [field](const ExperimentConfig& c) {
            return format_double(field(const_cast<ExperimentConfig&>(c)));
          }};
}

template <class Field>
Key uint_key(const char* section, const char* key, Field field) {
  return {section, key,
          [field](ExperimentConfig& c, std::string_view v, std::string_view n) {
            using T = std::remove_reference_t<decltype(field(c))>;
            const std::uint64_t x = to_uint(v, n);
            if (x > static_cast<std::uint64_t>(std::numeric_limits<T>::max())) {
              throw ConfigError(std::string(n) + ": value out of range");
            }
            field(c) = static_cast<T>(x);
          },
          [field](const ExperimentConfig& c) {
            return std::to_string(field(const_cast<ExperimentConfig&>(c)));
          }};
}

const std::vector<Key>& key_table() {
  static const std::vector<Key> keys = [] {
    std::vector<Key> k;
    k.push_back({"experiment", "task",
                 [](ExperimentConfig& c, std::string_view v, std::string_view) {
                   try {
                     c.trainer.task = parse_task(v);
                   } catch (const std::invalid_argument& e) {
                     throw ConfigError(std::string("experiment.task: ") + e.what());
                   }
                 },
                 [](const ExperimentConfig& c) { return std::string(task_name(c.trainer.task)); }});
    k.push_back({"experiment", "arm",
                 [](ExperimentConfig& c, std::string_view v, std::string_view) {
                   try {
                     c.trainer.arm = parse_arm(v);
                   } catch (const std::invalid_argument& e) {
                     throw ConfigError(std::string("experiment.arm: ") + e.what());
                   }
                 },
                 [](const ExperimentConfig& c) { return std::string(arm_name(c.trainer.arm)); }});
    k.push_back(uint_key("experiment", "total_steps",
                         [](ExperimentConfig& c) -> auto& { return c.trainer.total_steps; }));
    k.push_back({"experiment", "seeds",
                 [](ExperimentConfig& c, std::string_view v, std::string_view n) {
                   c.seeds = to_uint_list(v, n);
                 },
                 [](const ExperimentConfig& c) { return join(c.seeds); }});
    k.push_back({"experiment", "out_dir",
                 [](ExperimentConfig& c, std::string_view v, std::string_view) {
                   c.out_dir = std::string(v);
                 },
                 [](const ExperimentConfig& c) { return c.out_dir; }});

    k.push_back(real_key("trainer", "p0", [](ExperimentConfig& c) -> auto& { return c.trainer.p0; }));
    k.push_back(real_key("trainer", "lambda_annl",
                         [](ExperimentConfig& c) -> auto& { return c.trainer.lambda_annl; }));
    k.push_back(uint_key("trainer", "warmup_steps",
                         [](ExperimentConfig& c) -> auto& { return c.trainer.warmup_steps; }));
    k.push_back(uint_key("trainer", "gradient_steps_per_env_step", [](ExperimentConfig& c) -> auto& {
      return c.trainer.gradient_steps_per_env_step;
    }));
    k.push_back(uint_key("trainer", "eval_interval",
                         [](ExperimentConfig& c) -> auto& { return c.trainer.eval_interval; }));
    k.push_back(uint_key("trainer", "eval_episodes",
                         [](ExperimentConfig& c) -> auto& { return c.trainer.eval_episodes; }));
    k.push_back(real_key("trainer", "ema_factor",
                         [](ExperimentConfig& c) -> auto& { return c.trainer.ema_factor; }));
    k.push_back(real_key("trainer", "success_target",
                         [](ExperimentConfig& c) -> auto& { return c.trainer.success_target; }));
    k.push_back(uint_key("trainer", "rl_capacity",
                         [](ExperimentConfig& c) -> auto& { return c.trainer.rl_capacity; }));
    k.push_back(uint_key("trainer", "llm_capacity",
                         [](ExperimentConfig& c) -> auto& { return c.trainer.llm_capacity; }));
    k.push_back(real_key("trainer", "controller_noise",
                         [](ExperimentConfig& c) -> auto& { return c.trainer.controller_noise; }));
    k.push_back({"trainer", "controller_variant",
                 [](ExperimentConfig& c, std::string_view v, std::string_view) {
                   if (v == "corrected") {
                     c.trainer.controller_variant = PickPlaceVariant::corrected;
                   } else if (v == "first_round") {
                     c.trainer.controller_variant = PickPlaceVariant::first_round;
                   } else {
                     throw ConfigError("trainer.controller_variant: expected corrected or "
                                       "first_round, got '" + std::string(v) + "'");
                   }
                 },
                 [](const ExperimentConfig& c) {
                   return std::string(variant_name(c.trainer.controller_variant));
                 }});

    k.push_back({"agent", "hidden",
                 [](ExperimentConfig& c, std::string_view v, std::string_view n) {
                   const auto xs = to_uint_list(v, n);
                   c.trainer.agent.hidden.assign(xs.begin(), xs.end());
                 },
                 [](const ExperimentConfig& c) { return join(c.trainer.agent.hidden); }});
    k.push_back(real_key("agent", "gamma",
                         [](ExperimentConfig& c) -> auto& { return c.trainer.agent.gamma; }));
    k.push_back(real_key("agent", "tau", [](ExperimentConfig& c) -> auto& { return c.trainer.agent.tau; }));
    k.push_back(uint_key("agent", "policy_delay",
                         [](ExperimentConfig& c) -> auto& { return c.trainer.agent.policy_delay; }));
    k.push_back(real_key("agent", "lambda_im",
                         [](ExperimentConfig& c) -> auto& { return c.trainer.agent.lambda_im; }));
    k.push_back(real_key("agent", "target_noise_sigma", [](ExperimentConfig& c) -> auto& {
      return c.trainer.agent.target_noise_sigma;
    }));
    k.push_back(real_key("agent", "target_noise_clip", [](ExperimentConfig& c) -> auto& {
      return c.trainer.agent.target_noise_clip;
    }));
    k.push_back(real_key("agent", "exploration_noise_sigma", [](ExperimentConfig& c) -> auto& {
      return c.trainer.agent.exploration_noise_sigma;
    }));
    k.push_back(uint_key("agent", "batch_size",
                         [](ExperimentConfig& c) -> auto& { return c.trainer.agent.batch_size; }));
    k.push_back(real_key("agent", "actor_lr", [](ExperimentConfig& c) -> auto& {
      return c.trainer.agent.actor_optimizer.learning_rate;
    }));
    k.push_back(real_key("agent", "critic_lr", [](ExperimentConfig& c) -> auto& {
      return c.trainer.agent.critic_optimizer.learning_rate;
    }));
    // One set of Adam moments' hyper-parameters shared by actor and critics.
    k.push_back({"agent", "adam_beta1",
                 [](ExperimentConfig& c, std::string_view v, std::string_view n) {
                   c.trainer.agent.actor_optimizer.beta1 = c.trainer.agent.critic_optimizer.beta1 =
                       to_real(v, n);
                 },
                 [](const ExperimentConfig& c) {
                   return format_double(c.trainer.agent.actor_optimizer.beta1);
                 }});
    k.push_back({"agent", "adam_beta2",
                 [](ExperimentConfig& c, std::string_view v, std::string_view n) {
                   c.trainer.agent.actor_optimizer.beta2 = c.trainer.agent.critic_optimizer.beta2 =
                       to_real(v, n);
                 },
                 [](const ExperimentConfig& c) {
                   return format_double(c.trainer.agent.actor_optimizer.beta2);
                 }});
    k.push_back({"agent", "adam_epsilon",
                 [](ExperimentConfig& c, std::string_view v, std::string_view n) {
                   c.trainer.agent.actor_optimizer.epsilon =
                       c.trainer.agent.critic_optimizer.epsilon = to_real(v, n);
                 },
                 [](const ExperimentConfig& c) {
                   return format_double(c.trainer.agent.actor_optimizer.epsilon);
                 }});
    k.push_back(real_key("agent", "actor_final_layer_scale", [](ExperimentConfig& c) -> auto& {
      return c.trainer.agent.actor_final_layer_scale;
    }));
    k.push_back({"agent", "normalize_inputs",
                 [](ExperimentConfig& c, std::string_view v, std::string_view n) {
                   if (v == "true") {
                     c.trainer.agent.normalize_inputs = true;
                   } else if (v == "false") {
                     c.trainer.agent.normalize_inputs = false;
                   } else {
                     throw ConfigError(std::string(n) + ": expected true or false, got '" +
                                       std::string(v) + "'");
                   }
                 },
                 [](const ExperimentConfig& c) {
                   return std::string(c.trainer.agent.normalize_inputs ? "true" : "false");
                 }});

    k.push_back(uint_key("her", "k", [](ExperimentConfig& c) -> auto& { return c.trainer.her.k; }));
    return k;
  }();
  return keys;
}

const Key& find_key(std::string_view section, std::string_view key) {
  bool section_known = false;
  for (const Key& k : key_table()) {
    if (k.section == section) {
      section_known = true;
      if (k.key == key) return k;
    }
  }
  if (!section_known) throw ConfigError("unknown section [" + std::string(section) + "]");
  throw ConfigError("unknown key '" + where(section, key) + "'");
}

}  // namespace

void ConfigBuilder::set(std::string_view section, std::string_view key, std::string_view value) {
  // Rejects unknown names and malformed values while the origin is known.
  ExperimentConfig scratch;
  find_key(section, key).set(scratch, value, where(section, key));
  for (Entry& e : entries_) {
    if (e.section == section && e.key == key) {
      e.value = std::string(value);
      return;
    }
  }
  entries_.push_back({std::string(section), std::string(key), std::string(value)});
}

void ConfigBuilder::parse(std::string_view text, std::string_view origin) {
  std::istringstream in{std::string(text)};
  std::string line, section;
  std::set<std::string> seen;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto comment = line.find_first_of("#;");
    const std::string body = trim(std::string_view(line).substr(0, comment));
    if (body.empty()) continue;
    const std::string at = std::string(origin) + ":" + std::to_string(line_no) + ": ";
    if (body.front() == '[') {
      if (body.back() != ']') throw ConfigError(at + "malformed section header");
      section = trim(std::string_view(body).substr(1, body.size() - 2));
      bool known = false;
      for (const Key& k : key_table()) known = known || k.section == section;
      if (!known) throw ConfigError(at + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(at + "expected key = value");
    if (section.empty()) throw ConfigError(at + "key outside of any section");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (!seen.insert(where(section, key)).second) {
      throw ConfigError(at + "duplicate key '" + where(section, key) + "'");
    }
    try {
      set(section, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(at + e.what());
    }
  }
}

void ConfigBuilder::apply_override(std::string_view assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.substr(0, eq).find('.');
  if (eq == std::string_view::npos || dot == std::string_view::npos) {
    throw ConfigError("override '" + std::string(assignment) +
                      "' must look like section.key=value");
  }
  set(trim(assignment.substr(0, dot)), trim(assignment.substr(dot + 1, eq - dot - 1)),
      trim(assignment.substr(eq + 1)));
}

ExperimentConfig ConfigBuilder::build() const {
  ExperimentConfig c;
  // The task decides the defaults of two other keys, so it goes first.
  for (const Entry& e : entries_) {
    if (e.section == "experiment" && e.key == "task") {
      find_key(e.section, e.key).set(c, e.value, where(e.section, e.key));
    }
  }
  c.trainer.agent.gamma = default_gamma(c.trainer.task);
  c.trainer.lambda_annl = default_lambda_annl(c.trainer.task);
  for (const Entry& e : entries_) {
    find_key(e.section, e.key).set(c, e.value, where(e.section, e.key));
  }
  if (c.seeds.empty()) throw ConfigError("experiment.seeds must not be empty");
  try {
    c.trainer.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

ExperimentConfig parse_config(std::string_view text) {
  ConfigBuilder b;
  b.parse(text);
  return b.build();
}

std::string serialize_config(const ExperimentConfig& config) {
  std::string out;
  std::string section;
  for (const Key& k : key_table()) {
    if (section != k.section) {
      section = k.section;
      out += (out.empty() ? "[" : "\n[") + section + "]\n";
    }
    out += std::string(k.key) + " = " + k.get(config) + "\n";
  }
  return out;
}

}  // namespace rlingua
