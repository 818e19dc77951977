#include "rlingua/adam.hpp"

#include <cmath>
#include <stdexcept>

#include "rlingua/kernels.hpp"
#include "textio.hpp"

namespace rlingua {

namespace {

void check_matches(const Mlp& net, const LayerStack& stack, const char* what) {
  const auto& layers = net.layers();
  if (stack.size() != layers.size()) {
    throw std::invalid_argument(std::string("adam_step: ") + what + " shape mismatch");
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (!stack[l].same_shape(layers[l]) ||
        stack[l].weight.size() != layers[l].weight.size() ||
        stack[l].bias.size() != layers[l].bias.size()) {
      throw std::invalid_argument(std::string("adam_step: ") + what + " shape mismatch");
    }
  }
}

}  // namespace

void adam_step(Mlp& params, const LayerStack& grads, AdamState& state) {
  check_matches(params, grads, "gradient");
  check_matches(params, state.first_moment, "first moment");
  check_matches(params, state.second_moment, "second moment");

  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const AdamConfig& cfg = state.config;
  const kernels::AdamCoefficients coeff{cfg.learning_rate,
                                        cfg.beta1,
                                        cfg.beta2,
                                        cfg.epsilon,
                                        1.0 - std::pow(cfg.beta1, t),
                                        1.0 - std::pow(cfg.beta2, t)};
  auto& layers = params.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    kernels::adam_update(layers[l].weight, grads[l].weight,
                         state.first_moment[l].weight, state.second_moment[l].weight,
                         coeff);
    kernels::adam_update(layers[l].bias, grads[l].bias, state.first_moment[l].bias,
                         state.second_moment[l].bias, coeff);
  }
}

void adam_step(Mlp& params, const GradientBundle& grads, AdamState& state) {
  adam_step(params, grads.parameters, state);
}

void write_adam(std::ostream& out, const AdamState& state) {
  out << "rlingua-adam 1\nstep " << state.step_count << '\n';
  const double hyper[] = {state.config.learning_rate, state.config.beta1,
                          state.config.beta2, state.config.epsilon};
  textio::write_vector(out, "hyper", hyper);
  write_layer_stack(out, state.first_moment);
  write_layer_stack(out, state.second_moment);
}

AdamState read_adam(std::istream& in) {
  textio::expect(in, "rlingua-adam");
  if (textio::read_integer<int>(in) != 1) {
    throw std::runtime_error("unsupported adam checkpoint version");
  }
  AdamState state;
  textio::expect(in, "step");
  state.step_count = textio::read_integer<std::uint64_t>(in);
  const auto hyper = textio::read_vector(in, "hyper");
  if (hyper.size() != 4) throw std::runtime_error("adam checkpoint: bad hyper block");
  state.config = {hyper[0], hyper[1], hyper[2], hyper[3]};
  state.first_moment = read_layer_stack(in);
  state.second_moment = read_layer_stack(in);
  return state;
}

}  // namespace rlingua
