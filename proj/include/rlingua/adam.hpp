#pragma once

#include <cstdint>
#include <iosfwd>

#include "rlingua/mlp.hpp"

namespace rlingua {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

/// Bias-corrected Adam moments for one network.
struct AdamState {
  AdamConfig config;
  LayerStack first_moment;
  LayerStack second_moment;
  std::uint64_t step_count = 0;

  AdamState() = default;
  AdamState(const Mlp& net, AdamConfig cfg)
      : config(cfg), first_moment(net.zeros_like()), second_moment(net.zeros_like()) {}

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

void adam_step(Mlp& params, const LayerStack& grads, AdamState& state);
void adam_step(Mlp& params, const GradientBundle& grads, AdamState& state);

void write_adam(std::ostream& out, const AdamState& state);
AdamState read_adam(std::istream& in);

}  // namespace rlingua
