#pragma once

#include <cstddef>
#include <span>

// Dense-layer kernels over row-major batches.
//
// Every kernel exists twice: an OpenMP version used by the networks and a
// plain serial reference kept for tests and benchmarks. Both accumulate each
// output element in the same order, so results agree bit for bit regardless
// of the thread count.
//
// Shapes: weight is (outputs x inputs), x is (rows x inputs), y is
// (rows x outputs).

namespace rlingua::kernels {

struct DenseShape {
  std::size_t rows;
  std::size_t inputs;
  std::size_t outputs;
};

// y[r][o] = bias[o] + sum_i weight[o][i] * x[r][i]
void dense_forward(DenseShape shape, std::span<const double> weight,
                   std::span<const double> bias, std::span<const double> x,
                   std::span<double> y);

// dx[r][i] = sum_o dy[r][o] * weight[o][i]
void dense_backward_input(DenseShape shape, std::span<const double> weight,
                          std::span<const double> dy, std::span<double> dx);

// dweight[o][i] += sum_r dy[r][o] * x[r][i];  dbias[o] += sum_r dy[r][o]
void dense_backward_params(DenseShape shape, std::span<const double> x,
                           std::span<const double> dy,
                           std::span<double> dweight, std::span<double> dbias);

// target <- tau * online + (1 - tau) * target
void polyak_blend(std::span<double> target, std::span<const double> online,
                  double tau);

struct AdamCoefficients {
  double learning_rate;
  double beta1;
  double beta2;
  double epsilon;
  double bias_correction1;  // 1 - beta1^t
  double bias_correction2;  // 1 - beta2^t
};

void adam_update(std::span<double> params, std::span<const double> grads,
                 std::span<double> first_moment,
                 std::span<double> second_moment, const AdamCoefficients& c);

namespace serial {

void dense_forward(DenseShape shape, std::span<const double> weight,
                   std::span<const double> bias, std::span<const double> x,
                   std::span<double> y);
void dense_backward_input(DenseShape shape, std::span<const double> weight,
                          std::span<const double> dy, std::span<double> dx);
void dense_backward_params(DenseShape shape, std::span<const double> x,
                           std::span<const double> dy,
                           std::span<double> dweight, std::span<double> dbias);
void polyak_blend(std::span<double> target, std::span<const double> online,
                  double tau);
void adam_update(std::span<double> params, std::span<const double> grads,
                 std::span<double> first_moment,
                 std::span<double> second_moment, const AdamCoefficients& c);

}  // namespace serial

}  // namespace rlingua::kernels
