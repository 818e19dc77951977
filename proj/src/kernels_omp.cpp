#include "rlingua/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace rlingua::kernels {

namespace {

// Below this many multiply-adds the fork/join costs more than it saves.
constexpr std::size_t kParallelWork = 1u << 15;

bool worth_parallel(const DenseShape& s) {
  return s.rows * s.inputs * s.outputs >= kParallelWork;
}

// Register tile: kTileR accumulator rows of kTileC contiguous columns.
constexpr std::size_t kTileR = 4;
constexpr std::size_t kTileC = 16;

// c[r][j] = init[r][j] + sum_k a(r, k) * b[k * ldb + j], summed in k order,
// with a(r, k) = a[r * a_r + k * a_k]. Full tiles stay in registers; ragged
// edges take the scalar path.
// Eight lanes; unaligned loads and stores go through the aligned(8) alias.
typedef double Lane8 __attribute__((vector_size(64)));
typedef double Lane8u __attribute__((vector_size(64), aligned(8)));

static_assert(kTileC == 16, "full-tile kernel is written for two 8-lane columns");

// Lane-wise mul then add: per element this is the scalar sum in k order.
void tile_full(std::size_t depth, const double* a, std::size_t a_r, std::size_t a_k,
               const double* b, std::size_t ldb, double (&out)[kTileR][kTileC]) {
  Lane8 acc[kTileR][2];
  for (std::size_t r = 0; r < kTileR; ++r) {
    acc[r][0] = *reinterpret_cast<const Lane8u*>(&out[r][0]);
    acc[r][1] = *reinterpret_cast<const Lane8u*>(&out[r][8]);
  }
  for (std::size_t k = 0; k < depth; ++k) {
    const double* brow = b + k * ldb;
    const Lane8 b0 = *reinterpret_cast<const Lane8u*>(brow);
    const Lane8 b1 = *reinterpret_cast<const Lane8u*>(brow + 8);
    for (std::size_t r = 0; r < kTileR; ++r) {
      const double s = a[r * a_r + k * a_k];
      acc[r][0] += s * b0;
      acc[r][1] += s * b1;
    }
  }
  for (std::size_t r = 0; r < kTileR; ++r) {
    *reinterpret_cast<Lane8u*>(&out[r][0]) = acc[r][0];
    *reinterpret_cast<Lane8u*>(&out[r][8]) = acc[r][1];
  }
}

void tile_edge(std::size_t nr, std::size_t nc, std::size_t depth, const double* a,
               std::size_t a_r, std::size_t a_k, const double* b, std::size_t ldb,
               double (&acc)[kTileR][kTileC]) {
  for (std::size_t k = 0; k < depth; ++k) {
    const double* brow = b + k * ldb;
    for (std::size_t r = 0; r < nr; ++r) {
      const double s = a[r * a_r + k * a_k];
      for (std::size_t j = 0; j < nc; ++j) acc[r][j] += s * brow[j];
    }
  }
}

struct TileGrid {
  std::size_t rows, cols, row_tiles, col_tiles;
  TileGrid(std::size_t r, std::size_t c)
      : rows(r), cols(c), row_tiles((r + kTileR - 1) / kTileR),
        col_tiles((c + kTileC - 1) / kTileC) {}
  long count() const { return static_cast<long>(row_tiles * col_tiles); }
};

// Runs `init(r0, c0, nr, nc, acc)`, the tile product, then `store(...)` for
// every tile of an rows x cols output, in parallel when worthwhile.
template <class Init, class Store>
void tiled_product(const TileGrid& g, bool parallel, std::size_t depth, const double* a,
                   std::size_t a_r, std::size_t a_k, const double* b, std::size_t ldb,
                   Init init, Store store) {
#pragma omp parallel for schedule(static) if (parallel)
  for (long t = 0; t < g.count(); ++t) {
    const std::size_t r0 = static_cast<std::size_t>(t) / g.col_tiles * kTileR;
    const std::size_t c0 = static_cast<std::size_t>(t) % g.col_tiles * kTileC;
    const std::size_t nr = std::min(kTileR, g.rows - r0);
    const std::size_t nc = std::min(kTileC, g.cols - c0);
    double acc[kTileR][kTileC];
    init(r0, c0, nr, nc, acc);
    const double* at = a + r0 * a_r;
    const double* bt = b + c0;
    if (nr == kTileR && nc == kTileC) {
      tile_full(depth, at, a_r, a_k, bt, ldb, acc);
    } else {
      tile_edge(nr, nc, depth, at, a_r, a_k, bt, ldb, acc);
    }
    store(r0, c0, nr, nc, acc);
  }
}

using Tile = double[kTileR][kTileC];

}  // namespace

void dense_forward(DenseShape s, std::span<const double> weight,
                   std::span<const double> bias, std::span<const double> x,
                   std::span<double> y) {
  if (s.rows < kTileR || s.outputs < kTileC) {
    // Too few rows to amortize the transpose, or too few outputs to fill a
    // tile: plain dot products, same order.
#pragma omp parallel for schedule(static) if (worth_parallel(s))
    for (std::size_t r = 0; r < s.rows; ++r) {
      const double* xr = x.data() + r * s.inputs;
      for (std::size_t o = 0; o < s.outputs; ++o) {
        const double* wrow = weight.data() + o * s.inputs;
        double acc = bias[o];
        for (std::size_t i = 0; i < s.inputs; ++i) acc += xr[i] * wrow[i];
        y[r * s.outputs + o] = acc;
      }
    }
    return;
  }
  // Transposed weights make each step of the sum a contiguous row update.
  thread_local std::vector<double> wt;
  wt.resize(s.inputs * s.outputs);
  for (std::size_t o = 0; o < s.outputs; ++o) {
    for (std::size_t i = 0; i < s.inputs; ++i) {
      wt[i * s.outputs + o] = weight[o * s.inputs + i];
    }
  }
  const double* bp = bias.data();
  double* yp = y.data();
  tiled_product(
      TileGrid(s.rows, s.outputs), worth_parallel(s), s.inputs, x.data(), s.inputs, 1,
      wt.data(), s.outputs,
      [bp](std::size_t, std::size_t c0, std::size_t nr, std::size_t nc, Tile& acc) {
        for (std::size_t r = 0; r < nr; ++r) {
          for (std::size_t j = 0; j < nc; ++j) acc[r][j] = bp[c0 + j];
        }
      },
      [yp, &s](std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc, Tile& acc) {
        for (std::size_t r = 0; r < nr; ++r) {
          for (std::size_t j = 0; j < nc; ++j) yp[(r0 + r) * s.outputs + c0 + j] = acc[r][j];
        }
      });
}

void dense_backward_input(DenseShape s, std::span<const double> weight,
                          std::span<const double> dy, std::span<double> dx) {
  double* dxp = dx.data();
  tiled_product(
      TileGrid(s.rows, s.inputs), worth_parallel(s), s.outputs, dy.data(), s.outputs, 1,
      weight.data(), s.inputs,
      [](std::size_t, std::size_t, std::size_t nr, std::size_t nc, Tile& acc) {
        for (std::size_t r = 0; r < nr; ++r) {
          for (std::size_t j = 0; j < nc; ++j) acc[r][j] = 0.0;
        }
      },
      [dxp, &s](std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc, Tile& acc) {
        for (std::size_t r = 0; r < nr; ++r) {
          for (std::size_t j = 0; j < nc; ++j) dxp[(r0 + r) * s.inputs + c0 + j] = acc[r][j];
        }
      });
}

void dense_backward_params(DenseShape s, std::span<const double> x,
                           std::span<const double> dy,
                           std::span<double> dweight, std::span<double> dbias) {
  double* dwp = dweight.data();
  // Tile rows index outputs: a(o, r) = dy[r][o].
  tiled_product(
      TileGrid(s.outputs, s.inputs), worth_parallel(s), s.rows, dy.data(), 1, s.outputs,
      x.data(), s.inputs,
      [dwp, &s](std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc, Tile& acc) {
        for (std::size_t r = 0; r < nr; ++r) {
          for (std::size_t j = 0; j < nc; ++j) acc[r][j] = dwp[(r0 + r) * s.inputs + c0 + j];
        }
      },
      [dwp, &s](std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc, Tile& acc) {
        for (std::size_t r = 0; r < nr; ++r) {
          for (std::size_t j = 0; j < nc; ++j) dwp[(r0 + r) * s.inputs + c0 + j] = acc[r][j];
        }
      });
  const double* dyp = dy.data();
  double* dbp = dbias.data();
  const long outputs = static_cast<long>(s.outputs);
#pragma omp parallel for schedule(static) if (worth_parallel(s))
  for (long o = 0; o < outputs; ++o) {
    double db = dbp[o];
    for (std::size_t r = 0; r < s.rows; ++r) db += dyp[r * s.outputs + o];
    dbp[o] = db;
  }
}

void polyak_blend(std::span<double> target, std::span<const double> online,
                  double tau) {
  double* __restrict tp = target.data();
  const double* __restrict op = online.data();
  const long n = static_cast<long>(target.size());
  const double keep = 1.0 - tau;
#pragma omp parallel for simd schedule(static) if (n >= (1L << 16))
  for (long j = 0; j < n; ++j) tp[j] = tau * op[j] + keep * tp[j];
}

void adam_update(std::span<double> params, std::span<const double> grads,
                 std::span<double> first_moment,
                 std::span<double> second_moment, const AdamCoefficients& c) {
  double* __restrict p = params.data();
  const double* __restrict g = grads.data();
  double* __restrict m = first_moment.data();
  double* __restrict v = second_moment.data();
  const long n = static_cast<long>(params.size());
  const double one_minus_b1 = 1.0 - c.beta1;
  const double one_minus_b2 = 1.0 - c.beta2;
#pragma omp parallel for simd schedule(static) if (n >= (1L << 16))
  for (long j = 0; j < n; ++j) {
    const double gj = g[j];
    m[j] = c.beta1 * m[j] + one_minus_b1 * gj;
    v[j] = c.beta2 * v[j] + one_minus_b2 * (gj * gj);
    const double m_hat = m[j] / c.bias_correction1;
    const double v_hat = v[j] / c.bias_correction2;
    p[j] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
  }
}

}  // namespace rlingua::kernels
