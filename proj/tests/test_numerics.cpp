#include <doctest.h>

#include <cmath>
#include <cstring>
#include <sstream>

#include "oracles.hpp"
#include "rlingua/adam.hpp"
#include "rlingua/kernels.hpp"
#include "rlingua/mlp.hpp"

using namespace rlingua;
namespace kn = rlingua::kernels;

namespace {

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("parallel kernels match the serial reference bit for bit") {
  Rng rng = make_stream(11, 0);
  const kn::DenseShape shapes[] = {{1, 3, 2},   {3, 5, 7},     {4, 16, 16},    {5, 17, 33},
                                   {37, 70, 33}, {64, 64, 64}, {130, 40, 257}, {256, 128, 128}};
  for (const auto s : shapes) {
    CAPTURE(s.rows);
    CAPTURE(s.inputs);
    CAPTURE(s.outputs);
    const auto w = oracle::random_vec(s.inputs * s.outputs, rng);
    const auto b = oracle::random_vec(s.outputs, rng);
    const auto x = oracle::random_vec(s.rows * s.inputs, rng);
    const auto dy = oracle::random_vec(s.rows * s.outputs, rng);

    std::vector<double> y1(s.rows * s.outputs), y2(y1.size());
    kn::dense_forward(s, w, b, x, y1);
    kn::serial::dense_forward(s, w, b, x, y2);
    CHECK(bit_equal(y1, y2));

    std::vector<double> dx1(s.rows * s.inputs), dx2(dx1.size());
    kn::dense_backward_input(s, w, dy, dx1);
    kn::serial::dense_backward_input(s, w, dy, dx2);
    CHECK(bit_equal(dx1, dx2));

    auto dw1 = oracle::random_vec(w.size(), rng);
    auto db1 = oracle::random_vec(b.size(), rng);
    auto dw2 = dw1, db2 = db1;
    kn::dense_backward_params(s, x, dy, dw1, db1);
    kn::serial::dense_backward_params(s, x, dy, dw2, db2);
    CHECK(bit_equal(dw1, dw2));
    CHECK(bit_equal(db1, db2));

    // Straight-line oracle for the forward pass.
    double worst = 0.0;
    for (std::size_t r = 0; r < s.rows; ++r) {
      for (std::size_t o = 0; o < s.outputs; ++o) {
        double acc = b[o];
        for (std::size_t i = 0; i < s.inputs; ++i) acc += w[o * s.inputs + i] * x[r * s.inputs + i];
        worst = std::max(worst, std::abs(acc - y2[r * s.outputs + o]));
      }
    }
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("polyak and adam kernels match the serial reference") {
  Rng rng = make_stream(12, 0);
  const std::size_t n = 1000;
  auto target1 = oracle::random_vec(n, rng), target2 = target1;
  const auto online = oracle::random_vec(n, rng);
  kn::polyak_blend(target1, online, 0.005);
  kn::serial::polyak_blend(target2, online, 0.005);
  CHECK(bit_equal(target1, target2));

  auto p1 = oracle::random_vec(n, rng), p2 = p1;
  auto m1 = oracle::random_vec(n, rng), m2 = m1;
  auto v1 = oracle::random_vec(n, rng, 0.0, 1.0), v2 = v1;
  const auto g = oracle::random_vec(n, rng);
  const kn::AdamCoefficients c{1e-3, 0.9, 0.999, 1e-8, 1 - 0.9 * 0.9, 1 - 0.999 * 0.999};
  kn::adam_update(p1, g, m1, v1, c);
  kn::serial::adam_update(p2, g, m2, v2, c);
  CHECK(bit_equal(p1, p2));
  CHECK(bit_equal(m1, m2));
  CHECK(bit_equal(v1, v2));
}

TEST_CASE("mlp forward examples") {
  SUBCASE("zero weights return the bias") {
    Mlp net({3, 4, 2}, OutputActivation::linear);
    net.layers()[1].bias = {0.7, -1.3};
    CHECK(net.forward(std::vector<double>{5.0, -2.0, 1.0}) == std::vector<double>{0.7, -1.3});
  }
  SUBCASE("identity layer") {
    Mlp net({3, 3}, OutputActivation::linear);
    net.layers()[0].weight = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    const std::vector<double> x{0.25, -4.0, 9.5};
    CHECK(net.forward(x) == x);
  }
  SUBCASE("random 3-4-2 net against a hand-rolled oracle") {
    Rng rng = make_stream(3, 0);
    const Mlp net = oracle::random_mlp({3, 4, 2}, OutputActivation::linear, rng);
    for (int t = 0; t < 20; ++t) {
      const auto x = oracle::random_vec(3, rng);
      const auto y = net.forward(x);
      const auto ref = oracle::forward(net, x);
      for (std::size_t o = 0; o < 2; ++o) CHECK(std::abs(y[o] - ref[o]) <= 1e-12);
    }
  }
  SUBCASE("batched and single-sample passes agree") {
    Rng rng = make_stream(4, 0);
    const Mlp net = oracle::random_mlp({6, 9, 9, 3}, OutputActivation::bounded_tanh, rng);
    Matrix in(7, 6);
    for (double& v : in.data) v = uniform(rng, -1, 1);
    ForwardCache cache;
    net.forward_batch(in, cache);
    for (std::size_t r = 0; r < 7; ++r) {
      const auto y = net.forward(std::vector<double>(in.row(r).begin(), in.row(r).end()));
      for (std::size_t o = 0; o < 3; ++o) CHECK(std::abs(y[o] - cache.output(r, o)) <= 1e-12);
    }
  }
  SUBCASE("dimension mismatch") {
    Mlp net({3, 2}, OutputActivation::linear);
    CHECK_THROWS_AS(net.forward(std::vector<double>{1.0, 2.0}), std::invalid_argument);
  }
}

TEST_CASE("bounded-tanh output stays strictly inside the scale") {
  Rng rng = make_stream(5, 0);
  Mlp net = oracle::random_mlp({4, 8, 3}, OutputActivation::bounded_tanh, rng);
  for (auto& L : net.layers()) {
    for (double& w : L.weight) w *= 100.0;  // saturate
  }
  for (int t = 0; t < 500; ++t) {
    const auto y = net.forward(oracle::random_vec(4, rng, -10, 10));
    for (std::size_t o = 0; o < 3; ++o) {
      CHECK(std::abs(y[o]) < net.output_scale()[o]);
    }
  }
}

TEST_CASE("mlp backward examples") {
  SUBCASE("zero output gradient gives a zero bundle") {
    Rng rng = make_stream(6, 0);
    const Mlp net = oracle::random_mlp({3, 5, 2}, OutputActivation::linear, rng);
    const auto g = net.backward(oracle::random_vec(3, rng), std::vector<double>{0.0, 0.0});
    for (const auto& L : g.parameters) {
      for (double v : L.weight) CHECK(v == 0.0);
      for (double v : L.bias) CHECK(v == 0.0);
    }
    for (double v : g.input_gradient) CHECK(v == 0.0);
  }
  SUBCASE("scalar linear net") {
    Mlp net({1, 1}, OutputActivation::linear);
    net.layers()[0].weight = {-2.5};
    net.layers()[0].bias = {0.3};
    const auto g = net.backward(std::vector<double>{1.75}, std::vector<double>{1.0});
    CHECK(g.parameters[0].weight[0] == 1.75);
    CHECK(g.parameters[0].bias[0] == 1.0);
    CHECK(g.input_gradient[0] == -2.5);
  }
  SUBCASE("output gradient of the wrong length") {
    Mlp net({2, 2}, OutputActivation::linear);
    CHECK_THROWS_AS(net.backward(std::vector<double>{1.0, 1.0}, std::vector<double>{1.0}),
                    std::invalid_argument);
  }
}

TEST_CASE("random 4-8-3 net gradients match central differences") {
  Rng rng = make_stream(7, 0);
  for (auto head : {OutputActivation::linear, OutputActivation::bounded_tanh}) {
    Mlp net = oracle::random_mlp({4, 8, 3}, head, rng);
    std::vector<double> x;
    do {
      x = oracle::random_vec(4, rng);
    } while (oracle::kink_margin(net, x) < 1e-3);
    const auto gy = oracle::random_vec(3, rng);
    auto objective = [&] {
      const auto y = oracle::forward(net, x);
      double s = 0.0;
      for (std::size_t o = 0; o < 3; ++o) s += y[o] * gy[o];
      return s;
    };
    const auto g = net.backward(x, gy);
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
      auto& L = net.layers()[l];
      for (std::size_t j = 0; j < L.weight.size(); ++j) {
        CHECK(oracle::close_rel(g.parameters[l].weight[j],
                                oracle::central_difference(objective, L.weight[j], 1e-5)));
      }
      for (std::size_t j = 0; j < L.bias.size(); ++j) {
        CHECK(oracle::close_rel(g.parameters[l].bias[j],
                                oracle::central_difference(objective, L.bias[j], 1e-5)));
      }
    }
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(oracle::close_rel(g.input_gradient[i], oracle::central_difference(objective, x[i], 1e-5)));
    }
  }
}

TEST_CASE("adam examples") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    Rng rng = make_stream(8, 0);
    Mlp net = oracle::random_mlp({2, 3, 1}, OutputActivation::linear, rng);
    const Mlp before = net;
    AdamState st(net, {});
    adam_step(net, net.zeros_like(), st);
    CHECK(net == before);
    CHECK(st.step_count == 1);
  }
  SUBCASE("first step moves by the learning rate against the gradient sign") {
    Mlp net({1, 1}, OutputActivation::linear);
    AdamState st(net, {0.01, 0.9, 0.999, 1e-8});
    LayerStack g = net.zeros_like();
    g[0].weight[0] = 3.7;
    g[0].bias[0] = -0.02;
    adam_step(net, g, st);
    // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
    CHECK(net.layers()[0].weight[0] == doctest::Approx(-0.01 * 3.7 / (3.7 + 1e-8)).epsilon(1e-14));
    CHECK(net.layers()[0].bias[0] == doctest::Approx(0.01 * 0.02 / (0.02 + 1e-8)).epsilon(1e-14));
    CHECK(std::abs(std::abs(net.layers()[0].weight[0]) - 0.01) < 1e-9);
  }
  SUBCASE("two steps against a scalar hand computation") {
    Mlp net({1, 1}, OutputActivation::linear);
    net.layers()[0].weight[0] = 0.5;
    const double lr = 0.003, b1 = 0.8, b2 = 0.95, eps = 1e-6;
    AdamState st(net, {lr, b1, b2, eps});
    const double grads[] = {0.4, -1.1};
    double p = 0.5, m = 0.0, v = 0.0;
    for (int t = 1; t <= 2; ++t) {
      const double gv = grads[t - 1];
      LayerStack g = net.zeros_like();
      g[0].weight[0] = gv;
      adam_step(net, g, st);
      m = b1 * m + (1 - b1) * gv;
      v = b2 * v + (1 - b2) * gv * gv;
      p -= lr * (m / (1 - std::pow(b1, t))) / (std::sqrt(v / (1 - std::pow(b2, t))) + eps);
    }
    CHECK(std::abs(net.layers()[0].weight[0] - p) <= 1e-12);
    CHECK(st.step_count == 2);
  }
  SUBCASE("shape mismatch") {
    Mlp net({2, 2}, OutputActivation::linear);
    AdamState st(net, {});
    Mlp other({3, 2}, OutputActivation::linear);
    CHECK_THROWS_AS(adam_step(net, other.zeros_like(), st), std::invalid_argument);
  }
}

TEST_CASE("polyak update examples") {
  Rng rng = make_stream(9, 0);
  const Mlp online = oracle::random_mlp({3, 4, 2}, OutputActivation::linear, rng);
  Mlp target = oracle::random_mlp({3, 4, 2}, OutputActivation::linear, rng);
  const Mlp before = target;

  Mlp t1 = target;
  polyak_update(t1, online, 1.0);
  CHECK(t1 == online);

  Mlp t0 = target;
  polyak_update(t0, online, 0.0);
  CHECK(t0 == before);

  Mlp s({1, 1}, OutputActivation::linear), z({1, 1}, OutputActivation::linear);
  s.layers()[0].weight[0] = 1.0;
  polyak_update(s, z, 0.005);
  CHECK(s.layers()[0].weight[0] == 0.995);

  polyak_update(target, online, 0.005);
  for (std::size_t l = 0; l < target.layers().size(); ++l) {
    for (std::size_t j = 0; j < target.layers()[l].weight.size(); ++j) {
      CHECK(target.layers()[l].weight[j] ==
            0.005 * online.layers()[l].weight[j] + (1 - 0.005) * before.layers()[l].weight[j]);
    }
  }
  Mlp wrong({3, 5, 2}, OutputActivation::linear);
  CHECK_THROWS_AS(polyak_update(wrong, online, 0.5), std::invalid_argument);
}

TEST_CASE("network and optimizer checkpoints round-trip exactly") {
  Rng rng = make_stream(10, 0);
  Mlp net = oracle::random_mlp({5, 7, 3}, OutputActivation::bounded_tanh, rng);
  AdamState st(net, {1e-3, 0.9, 0.999, 1e-8});
  LayerStack g = net.zeros_like();
  for (auto& L : g) {
    for (double& v : L.weight) v = uniform(rng, -1, 1);
  }
  adam_step(net, g, st);

  std::stringstream a;
  write_mlp(a, net);
  CHECK(read_mlp(a) == net);
  std::stringstream b;
  write_adam(b, st);
  CHECK(read_adam(b) == st);

  std::stringstream bad("rlingua-mlp 99\n");
  CHECK_THROWS(read_mlp(bad));
}
