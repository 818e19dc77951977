#include "rlingua/mlp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "rlingua/kernels.hpp"
#include "textio.hpp"

namespace rlingua {

namespace {

kernels::DenseShape shape_of(const DenseLayer& layer, std::size_t rows) {
  return {rows, layer.inputs, layer.outputs};
}

// Scaled tanh that never reaches the bound itself, even once tanh saturates
// to +-1 in double precision.
double bounded_tanh(double z, double scale) {
  const double out = scale * std::tanh(z);
  if (std::abs(out) >= scale) {
    return std::copysign(std::nextafter(scale, 0.0), out);
  }
  return out;
}

void check_sizes(const std::vector<std::size_t>& sizes) {
  if (sizes.size() < 2) {
    throw std::invalid_argument("Mlp needs at least an input and output size");
  }
  for (std::size_t s : sizes) {
    if (s == 0) throw std::invalid_argument("Mlp layer sizes must be positive");
  }
}

}  // namespace

Mlp::Mlp(std::vector<std::size_t> layer_sizes, OutputActivation output,
         std::vector<double> output_scale)
    : sizes_(std::move(layer_sizes)), output_(output), scale_(std::move(output_scale)) {
  check_sizes(sizes_);
  if (output_ == OutputActivation::bounded_tanh) {
    if (scale_.size() != sizes_.back()) {
      throw std::invalid_argument("bounded-tanh head needs one scale per output");
    }
    for (double s : scale_) {
      if (!(s > 0.0)) throw std::invalid_argument("output scales must be positive");
    }
  } else if (!scale_.empty()) {
    throw std::invalid_argument("linear head takes no output scale");
  }
  layers_.reserve(sizes_.size() - 1);
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    layers_.emplace_back(sizes_[l], sizes_[l + 1]);
  }
}

Mlp Mlp::initialized(std::vector<std::size_t> layer_sizes, OutputActivation output,
                     std::vector<double> output_scale, Rng& rng,
                     double final_layer_scale) {
  Mlp net(std::move(layer_sizes), output, std::move(output_scale));
  for (std::size_t l = 0; l < net.layers_.size(); ++l) {
    DenseLayer& layer = net.layers_[l];
    double bound = 1.0 / std::sqrt(static_cast<double>(layer.inputs));
    if (l + 1 == net.layers_.size()) bound *= final_layer_scale;
    for (double& w : layer.weight) w = uniform(rng, -bound, bound);
    for (double& b : layer.bias) b = uniform(rng, -bound, bound);
  }
  return net;
}

LayerStack Mlp::zeros_like() const {
  LayerStack out;
  out.reserve(layers_.size());
  for (const auto& layer : layers_) out.emplace_back(layer.inputs, layer.outputs);
  return out;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer.weight.size() + layer.bias.size();
  return n;
}

bool Mlp::same_topology(const Mlp& other) const {
  return sizes_ == other.sizes_ && output_ == other.output_;
}

void Mlp::forward_batch(const Matrix& input, ForwardCache& cache) const {
  if (input.cols != input_size()) {
    throw std::invalid_argument("Mlp input has " + std::to_string(input.cols) +
                                " columns, expected " +
                                std::to_string(input_size()));
  }
  const std::size_t rows = input.rows;
  const std::size_t n_layers = layers_.size();
  cache.inputs.resize(n_layers);
  cache.pre_activations.resize(n_layers);
  cache.inputs[0] = input;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const DenseLayer& layer = layers_[l];
    Matrix& z = cache.pre_activations[l];
    z.resize(rows, layer.outputs);
    kernels::dense_forward(shape_of(layer, rows), layer.weight, layer.bias,
                           cache.inputs[l].data, z.data);
    Matrix& next = (l + 1 < n_layers) ? cache.inputs[l + 1] : cache.output;
    next.resize(rows, layer.outputs);
    if (l + 1 < n_layers) {
      for (std::size_t j = 0; j < z.data.size(); ++j) {
        next.data[j] = z.data[j] > 0.0 ? z.data[j] : 0.0;
      }
    } else if (output_ == OutputActivation::bounded_tanh) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t o = 0; o < layer.outputs; ++o) {
          next(r, o) = bounded_tanh(z(r, o), scale_[o]);
        }
      }
    } else {
      next.data = z.data;
    }
  }
}

void Mlp::backward_batch(const ForwardCache& cache, const Matrix& output_gradient,
                         LayerStack* param_grads, Matrix* input_grad) const {
  const std::size_t n_layers = layers_.size();
  if (cache.pre_activations.size() != n_layers) {
    throw std::invalid_argument("forward cache does not match this network");
  }
  const std::size_t rows = cache.output.rows;
  if (output_gradient.rows != rows || output_gradient.cols != output_size()) {
    throw std::invalid_argument("output gradient shape mismatch");
  }
  if (param_grads != nullptr) {
    if (param_grads->size() != n_layers) {
      throw std::invalid_argument("gradient stack does not match this network");
    }
    for (std::size_t l = 0; l < n_layers; ++l) {
      if (!(*param_grads)[l].same_shape(layers_[l])) {
        throw std::invalid_argument("gradient stack does not match this network");
      }
    }
  }

  // delta holds d(loss)/d(pre-activation) of the current layer.
  Matrix delta(rows, output_size());
  const Matrix& z_out = cache.pre_activations.back();
  if (output_ == OutputActivation::bounded_tanh) {
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t o = 0; o < output_size(); ++o) {
        const double t = std::tanh(z_out(r, o));
        delta(r, o) = output_gradient(r, o) * scale_[o] * (1.0 - t * t);
      }
    }
  } else {
    delta.data = output_gradient.data;
  }

  Matrix upstream;
  for (std::size_t l = n_layers; l-- > 0;) {
    const DenseLayer& layer = layers_[l];
    const auto shape = shape_of(layer, rows);
    if (param_grads != nullptr) {
      DenseLayer& g = (*param_grads)[l];
      kernels::dense_backward_params(shape, cache.inputs[l].data, delta.data,
                                     g.weight, g.bias);
    }
    if (l == 0 && input_grad == nullptr) break;
    upstream.resize(rows, layer.inputs);
    kernels::dense_backward_input(shape, layer.weight, delta.data, upstream.data);
    if (l == 0) {
      *input_grad = std::move(upstream);
      break;
    }
    const Matrix& z_prev = cache.pre_activations[l - 1];
    for (std::size_t j = 0; j < upstream.data.size(); ++j) {
      if (!(z_prev.data[j] > 0.0)) upstream.data[j] = 0.0;
    }
    std::swap(delta, upstream);
  }
}

std::vector<double> Mlp::forward(std::span<const double> input) const {
  if (input.size() != input_size()) {
    throw std::invalid_argument("Mlp input has length " + std::to_string(input.size()) +
                                ", expected " + std::to_string(input_size()));
  }
  Matrix x(1, input.size());
  std::copy(input.begin(), input.end(), x.data.begin());
  ForwardCache cache;
  forward_batch(x, cache);
  return std::move(cache.output.data);
}

GradientBundle Mlp::backward(std::span<const double> input,
                             std::span<const double> output_gradient) const {
  if (input.size() != input_size()) {
    throw std::invalid_argument("Mlp input length mismatch");
  }
  if (output_gradient.size() != output_size()) {
    throw std::invalid_argument("output gradient length mismatch");
  }
  Matrix x(1, input.size());
  std::copy(input.begin(), input.end(), x.data.begin());
  ForwardCache cache;
  forward_batch(x, cache);
  Matrix dy(1, output_gradient.size());
  std::copy(output_gradient.begin(), output_gradient.end(), dy.data.begin());
  GradientBundle bundle;
  bundle.parameters = zeros_like();
  Matrix dx;
  backward_batch(cache, dy, &bundle.parameters, &dx);
  bundle.input_gradient = std::move(dx.data);
  return bundle;
}

void polyak_update(Mlp& target, const Mlp& online, double tau) {
  if (!target.same_topology(online)) {
    throw std::invalid_argument("polyak_update: topologies differ");
  }
  if (!(tau >= 0.0 && tau <= 1.0)) {
    throw std::invalid_argument("polyak_update: tau must lie in [0, 1]");
  }
  for (std::size_t l = 0; l < target.layers().size(); ++l) {
    kernels::polyak_blend(target.layers()[l].weight, online.layers()[l].weight, tau);
    kernels::polyak_blend(target.layers()[l].bias, online.layers()[l].bias, tau);
  }
}

// --- checkpoint ------------------------------------------------------------

void write_layer_stack(std::ostream& out, const LayerStack& stack) {
  out << "stack " << stack.size() << '\n';
  for (const auto& layer : stack) {
    out << "dense " << layer.inputs << ' ' << layer.outputs << '\n';
    textio::write_vector(out, "w", layer.weight);
    textio::write_vector(out, "b", layer.bias);
  }
}

LayerStack read_layer_stack(std::istream& in) {
  textio::expect(in, "stack");
  const auto n = textio::read_integer<std::size_t>(in);
  LayerStack stack;
  stack.reserve(n);
  for (std::size_t l = 0; l < n; ++l) {
    textio::expect(in, "dense");
    DenseLayer layer;
    layer.inputs = textio::read_integer<std::size_t>(in);
    layer.outputs = textio::read_integer<std::size_t>(in);
    layer.weight = textio::read_vector(in, "w");
    layer.bias = textio::read_vector(in, "b");
    if (layer.weight.size() != layer.inputs * layer.outputs ||
        layer.bias.size() != layer.outputs) {
      throw std::runtime_error("layer payload does not match its declared shape");
    }
    stack.push_back(std::move(layer));
  }
  return stack;
}

void write_mlp(std::ostream& out, const Mlp& net) {
  out << "rlingua-mlp 1\n";
  out << "sizes " << net.layer_sizes().size();
  for (auto s : net.layer_sizes()) out << ' ' << s;
  out << "\nhidden relu\noutput "
      << (net.output_activation() == OutputActivation::linear ? "linear" : "bounded_tanh")
      << '\n';
  textio::write_vector(out, "scale", net.output_scale());
  write_layer_stack(out, net.layers());
}

Mlp read_mlp(std::istream& in) {
  textio::expect(in, "rlingua-mlp");
  if (textio::read_integer<int>(in) != 1) {
    throw std::runtime_error("unsupported mlp checkpoint version");
  }
  textio::expect(in, "sizes");
  std::vector<std::size_t> sizes(textio::read_integer<std::size_t>(in));
  for (auto& s : sizes) s = textio::read_integer<std::size_t>(in);
  textio::expect(in, "hidden");
  textio::expect(in, "relu");
  textio::expect(in, "output");
  const std::string head = textio::next_token(in);
  OutputActivation act;
  if (head == "linear") {
    act = OutputActivation::linear;
  } else if (head == "bounded_tanh") {
    act = OutputActivation::bounded_tanh;
  } else {
    throw std::runtime_error("unknown output activation '" + head + "'");
  }
  auto scale = textio::read_vector(in, "scale");
  Mlp net(std::move(sizes), act, std::move(scale));
  LayerStack stack = read_layer_stack(in);
  if (stack.size() != net.layers().size()) {
    throw std::runtime_error("mlp checkpoint has the wrong number of layers");
  }
  for (std::size_t l = 0; l < stack.size(); ++l) {
    if (!stack[l].same_shape(net.layers()[l])) {
      throw std::runtime_error("mlp checkpoint layer shape mismatch");
    }
  }
  net.layers() = std::move(stack);
  return net;
}

}  // namespace rlingua
