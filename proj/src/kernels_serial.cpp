#include "rlingua/kernels.hpp"

#include <cmath>

namespace rlingua::kernels::serial {

void dense_forward(DenseShape s, std::span<const double> weight,
                   std::span<const double> bias, std::span<const double> x,
                   std::span<double> y) {
  for (std::size_t r = 0; r < s.rows; ++r) {
    for (std::size_t o = 0; o < s.outputs; ++o) {
      double acc = bias[o];
      for (std::size_t i = 0; i < s.inputs; ++i) {
        acc += x[r * s.inputs + i] * weight[o * s.inputs + i];
      }
      y[r * s.outputs + o] = acc;
    }
  }
}

void dense_backward_input(DenseShape s, std::span<const double> weight,
                          std::span<const double> dy, std::span<double> dx) {
  for (std::size_t r = 0; r < s.rows; ++r) {
    for (std::size_t i = 0; i < s.inputs; ++i) {
      double acc = 0.0;
      for (std::size_t o = 0; o < s.outputs; ++o) {
        acc += dy[r * s.outputs + o] * weight[o * s.inputs + i];
      }
      dx[r * s.inputs + i] = acc;
    }
  }
}

void dense_backward_params(DenseShape s, std::span<const double> x,
                           std::span<const double> dy,
                           std::span<double> dweight, std::span<double> dbias) {
  for (std::size_t o = 0; o < s.outputs; ++o) {
    for (std::size_t i = 0; i < s.inputs; ++i) {
      double acc = dweight[o * s.inputs + i];
      for (std::size_t r = 0; r < s.rows; ++r) {
        acc += dy[r * s.outputs + o] * x[r * s.inputs + i];
      }
      dweight[o * s.inputs + i] = acc;
    }
    double acc = dbias[o];
    for (std::size_t r = 0; r < s.rows; ++r) acc += dy[r * s.outputs + o];
    dbias[o] = acc;
  }
}

void polyak_blend(std::span<double> target, std::span<const double> online,
                  double tau) {
  for (std::size_t j = 0; j < target.size(); ++j) {
    target[j] = tau * online[j] + (1.0 - tau) * target[j];
  }
}

void adam_update(std::span<double> params, std::span<const double> grads,
                 std::span<double> m, std::span<double> v,
                 const AdamCoefficients& c) {
  for (std::size_t j = 0; j < params.size(); ++j) {
    const double g = grads[j];
    m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g;
    v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * (g * g);
    const double m_hat = m[j] / c.bias_correction1;
    const double v_hat = v[j] / c.bias_correction2;
    params[j] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
  }
}

}  // namespace rlingua::kernels::serial
