// Serial reference vs OpenMP dense kernels at the network's working shapes.
//
//   bench_kernels --benchmark_filter=forward

#include <benchmark/benchmark.h>

#include <vector>

#include "rlingua/kernels.hpp"
#include "rlingua/rng.hpp"

namespace kn = rlingua::kernels;

namespace {

struct Operands {
  kn::DenseShape shape;
  std::vector<double> w, b, x, dy, y, dx, dw, db;

  explicit Operands(const benchmark::State& st)
      : shape{static_cast<std::size_t>(st.range(0)), static_cast<std::size_t>(st.range(1)),
              static_cast<std::size_t>(st.range(2))} {
    rlingua::Rng rng = rlingua::make_stream(1, 0);
    auto fill = [&](std::vector<double>& v, std::size_t n) {
      v.resize(n);
      for (double& e : v) e = rlingua::uniform(rng, -1, 1);
    };
    fill(w, shape.inputs * shape.outputs);
    fill(b, shape.outputs);
    fill(x, shape.rows * shape.inputs);
    fill(dy, shape.rows * shape.outputs);
    y.assign(shape.rows * shape.outputs, 0.0);
    dx.assign(shape.rows * shape.inputs, 0.0);
    dw.assign(w.size(), 0.0);
    db.assign(b.size(), 0.0);
  }
  double macs() const { return static_cast<double>(shape.rows * shape.inputs * shape.outputs); }
};

template <bool Parallel>
void forward(benchmark::State& st) {
  Operands o(st);
  for (auto _ : st) {
    if constexpr (Parallel) {
      kn::dense_forward(o.shape, o.w, o.b, o.x, o.y);
    } else {
      kn::serial::dense_forward(o.shape, o.w, o.b, o.x, o.y);
    }
    benchmark::DoNotOptimize(o.y.data());
  }
  st.counters["MAC/s"] = benchmark::Counter(o.macs(), benchmark::Counter::kIsIterationInvariantRate);
}

template <bool Parallel>
void backward(benchmark::State& st) {
  Operands o(st);
  for (auto _ : st) {
    if constexpr (Parallel) {
      kn::dense_backward_input(o.shape, o.w, o.dy, o.dx);
      kn::dense_backward_params(o.shape, o.x, o.dy, o.dw, o.db);
    } else {
      kn::serial::dense_backward_input(o.shape, o.w, o.dy, o.dx);
      kn::serial::dense_backward_params(o.shape, o.x, o.dy, o.dw, o.db);
    }
    benchmark::DoNotOptimize(o.dw.data());
  }
  st.counters["MAC/s"] =
      benchmark::Counter(2 * o.macs(), benchmark::Counter::kIsIterationInvariantRate);
}

void shapes(benchmark::internal::Benchmark* b) {
  b->Args({256, 256, 256})->Args({256, 22, 256})->Args({256, 256, 1})->Args({128, 64, 64})->Args({1, 256, 256});
}

}  // namespace

BENCHMARK(forward<false>)->Name("forward/serial")->Apply(shapes);
BENCHMARK(forward<true>)->Name("forward/omp")->Apply(shapes);
BENCHMARK(backward<false>)->Name("backward/serial")->Apply(shapes);
BENCHMARK(backward<true>)->Name("backward/omp")->Apply(shapes);

BENCHMARK_MAIN();
