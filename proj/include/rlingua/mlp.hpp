#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "rlingua/rng.hpp"

namespace rlingua {

/// Row-major dense matrix used for mini-batches.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  void resize(std::size_t r, std::size_t c) {
    rows = r;
    cols = c;
    data.assign(r * c, 0.0);
  }
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data[r * cols + c];
  }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }
};

/// One affine layer. The same shape is reused for gradients and optimizer
/// moments so they always mirror the network.
struct DenseLayer {
  std::size_t inputs = 0;
  std::size_t outputs = 0;
  std::vector<double> weight;  // outputs x inputs, row-major
  std::vector<double> bias;    // outputs

  DenseLayer() = default;
  DenseLayer(std::size_t in, std::size_t out)
      : inputs(in), outputs(out), weight(in * out, 0.0), bias(out, 0.0) {}

  bool same_shape(const DenseLayer& other) const {
    return inputs == other.inputs && outputs == other.outputs;
  }
  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

using LayerStack = std::vector<DenseLayer>;

enum class OutputActivation { linear, bounded_tanh };

struct GradientBundle {
  LayerStack parameters;
  std::vector<double> input_gradient;
};

/// Activations retained by a batched forward pass for the backward pass.
struct ForwardCache {
  std::vector<Matrix> inputs;       // input to each layer
  std::vector<Matrix> pre_activations;
  Matrix output;
};

/// Feed-forward network: rectifier hidden layers, linear or bounded-tanh head.
class Mlp {
 public:
  Mlp() = default;
  /// Zero-initialized network. `output_scale` is required (one entry per
  /// output) for bounded-tanh heads and must be empty for linear heads.
  Mlp(std::vector<std::size_t> layer_sizes, OutputActivation output,
      std::vector<double> output_scale = {});

  /// Uniform +-1/sqrt(fan_in) initialization; the last layer is further
  /// multiplied by `final_layer_scale`.
  static Mlp initialized(std::vector<std::size_t> layer_sizes,
                         OutputActivation output,
                         std::vector<double> output_scale, Rng& rng,
                         double final_layer_scale = 1.0);

  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
  std::size_t input_size() const { return sizes_.front(); }
  std::size_t output_size() const { return sizes_.back(); }
  OutputActivation output_activation() const { return output_; }
  const std::vector<double>& output_scale() const { return scale_; }

  LayerStack& layers() { return layers_; }
  const LayerStack& layers() const { return layers_; }

  /// A zero-filled stack with this network's parameter shapes.
  LayerStack zeros_like() const;
  std::size_t parameter_count() const;
  bool same_topology(const Mlp& other) const;

  std::vector<double> forward(std::span<const double> input) const;

  /// Exact gradients of dot(output, output_gradient) w.r.t. every parameter
  /// and the input.
  GradientBundle backward(std::span<const double> input,
                          std::span<const double> output_gradient) const;

  void forward_batch(const Matrix& input, ForwardCache& cache) const;

  /// Back-propagates `output_gradient` (rows x outputs) through the pass in
  /// `cache`. Parameter gradients are *added* into `param_grads` when it is
  /// non-null; the input gradient is written to `input_grad` when non-null.
  void backward_batch(const ForwardCache& cache, const Matrix& output_gradient,
                      LayerStack* param_grads, Matrix* input_grad) const;

  friend bool operator==(const Mlp&, const Mlp&) = default;

 private:
  std::vector<std::size_t> sizes_;
  OutputActivation output_ = OutputActivation::linear;
  std::vector<double> scale_;
  LayerStack layers_;
};

/// target <- tau * online + (1 - tau) * target, parameter by parameter.
void polyak_update(Mlp& target, const Mlp& online, double tau);

void write_mlp(std::ostream& out, const Mlp& net);
Mlp read_mlp(std::istream& in);

void write_layer_stack(std::ostream& out, const LayerStack& stack);
LayerStack read_layer_stack(std::istream& in);

}  // namespace rlingua
