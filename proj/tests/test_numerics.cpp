#include <doctest.h>

#include <cmath>
#include <vector>

#include "ltr/adam.hpp"
#include "ltr/gradcheck.hpp"
#include "ltr/graph.hpp"
#include "ltr/kernels.hpp"
#include "ltr/rng.hpp"

using namespace ltr;

namespace {

Tensor random_tensor(Rng& rng, std::vector<int> shape) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& x : t.data) x = rng.normal();
  return t;
}

}  // namespace

TEST_CASE("matmul identity returns the operand") {
  Rng rng(7);
  Graph g;
  Tensor a = random_tensor(rng, {3, 3});
  Tensor eye = Tensor::zeros({3, 3});
  for (int i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
  Var r = matmul(g.leaf(eye), g.leaf(a));
  for (std::int64_t i = 0; i < a.numel(); ++i) CHECK(g.value(r)[i] == doctest::Approx(a[i]).epsilon(1e-15));
}

TEST_CASE("softmax of equal inputs is uniform") {
  Graph g;
  Var s = softmax(g.leaf(Tensor::vec({0.0, 0.0})));
  CHECK(g.value(s)[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(g.value(s)[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("matmul matches a naive triple-loop oracle") {
  Rng rng(13);
  Tensor a = random_tensor(rng, {4, 5});
  Tensor b = random_tensor(rng, {5, 2});
  // Independent oracle: explicit triple sum.
  Tensor expect = Tensor::zeros({4, 2});
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 2; ++j) {
      double s = 0.0;
      for (int k = 0; k < 5; ++k) s += a.at(i, k) * b.at(k, j);
      expect.at(i, j) = s;
    }
  Graph g;
  Var r = matmul(g.leaf(a), g.leaf(b));
  for (std::int64_t i = 0; i < expect.numel(); ++i)
    CHECK(g.value(r)[i] == doctest::Approx(expect[i]).epsilon(1e-12));
}

TEST_CASE("shape mismatch is rejected with both shapes named") {
  Graph g;
  Var a = g.leaf(Tensor::zeros({3, 4}));
  Var b = g.leaf(Tensor::zeros({5, 2}));
  try {
    matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    std::string msg = e.what();
    CHECK(msg.find("[3x4]") != std::string::npos);
    CHECK(msg.find("[5x2]") != std::string::npos);
  }
}

TEST_CASE("backward of sum is all ones") {
  Graph g;
  Var p = g.leaf(Tensor::vec({1.5, -2.0, 0.25}));
  Var loss = sum_all(p);
  g.backward(loss);
  for (int i = 0; i < 3; ++i) CHECK(g.grad(p)[i] == 1.0);
}

TEST_CASE("backward of sum of squares is 2p") {
  Graph g;
  Var p = g.leaf(Tensor::vec({1.0, 2.0}));
  Var loss = sum_all(square(p));
  g.backward(loss);
  CHECK(g.grad(p)[0] == doctest::Approx(2.0));
  CHECK(g.grad(p)[1] == doctest::Approx(4.0));
}

TEST_CASE("backward rejects non-scalar loss") {
  Graph g;
  Var p = g.leaf(Tensor::vec({1.0, 2.0}));
  CHECK_THROWS_AS(g.backward(square(p)), ShapeError);
}

TEST_CASE("composite graph gradient matches finite differences") {
  Rng rng(101);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> point(6);
    for (double& x : point) x = rng.uniform(-1.0, 1.0);
    auto f = [](Graph&, Var x) {
      Var s = softmax(x);
      Var t = tanh_op(scale(x, 0.7));
      Var m = mul(s, t);
      return add(logsumexp(x), mean_all(square(m)));
    };
    CHECK(grad_check(f, point, 1e-5) < 1e-4);
  }
}

TEST_CASE("shared subexpressions accumulate gradients") {
  // loss = sum(h) + sum(h*h) with h shared, against a duplicated-subgraph
  // oracle where the two uses are rebuilt independently.
  Rng rng(55);
  Tensor x = random_tensor(rng, {4});
  Graph g;
  Var xv = g.leaf(x);
  Var h = tanh_op(xv);
  Var loss = add(sum_all(h), sum_all(mul(h, h)));
  g.backward(loss);
  Tensor shared_grad = g.grad(xv);

  Graph g2;
  Var x1 = g2.leaf(x);
  Var x2 = g2.leaf(x);
  Var l2 = add(sum_all(tanh_op(x1)), sum_all(mul(tanh_op(x2), tanh_op(x2))));
  g2.backward(l2);
  for (int i = 0; i < 4; ++i) {
    double expect = g2.grad(x1)[i] + g2.grad(x2)[i];
    CHECK(shared_grad[i] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("unreached parameters get zero gradient") {
  Graph g;
  ParamTensor used{"used", Tensor::vec({2.0})};
  ParamTensor unused{"unused", Tensor::vec({3.0})};
  Var u = g.param(used);
  g.param(unused);
  g.backward(sum_all(square(u)));
  Tensor gu = g.param_grad(unused);
  CHECK(gu.numel() == 1);
  CHECK(gu[0] == 0.0);
}

TEST_CASE("softmax output sums to one with entries in (0,1)") {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    int n = 2 + static_cast<int>(rng.uniform_below(16));
    Tensor x = random_tensor(rng, {n});
    for (double& v : x.data) v *= 10.0;
    Graph g;
    Var s = softmax(g.leaf(x));
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      double p = g.value(s)[i];
      CHECK(p > 0.0);
      CHECK(p < 1.0);
      sum += p;
    }
    CHECK(std::abs(sum - 1.0) < 1e-9);
  }
}

TEST_CASE("every differentiable op passes grad_check at random points") {
  Rng rng(77);
  auto run = [&](const ScalarFn& f, int dim, double lo, double hi) {
    for (int t = 0; t < 100; ++t) {
      std::vector<double> p(dim);
      for (double& x : p) x = rng.uniform(lo, hi);
      double err = grad_check(f, p, 1e-5);
      CHECK(err < 1e-4);
      if (err >= 1e-4) return;  // avoid flooding output
    }
  };

  SUBCASE("elementwise and reductions") {
    run([](Graph&, Var x) { return sum_all(sigmoid(x)); }, 5, -3, 3);
    run([](Graph&, Var x) { return sum_all(tanh_op(x)); }, 5, -3, 3);
    run([](Graph&, Var x) { return sum_all(exp_op(x)); }, 5, -2, 2);
    run([](Graph&, Var x) { return sum_all(log_op(add_const(square(x), 0.5))); }, 5, -2, 2);
    run([](Graph&, Var x) { return sum_all(inv(add_const(square(x), 1.0))); }, 5, -2, 2);
    run([](Graph&, Var x) { return mean_all(square(x)); }, 7, -2, 2);
    run([](Graph&, Var x) { return logsumexp(x); }, 6, -3, 3);
    run([](Graph&, Var x) { return pick(softmax(x), 1); }, 4, -2, 2);
    run([](Graph&, Var x) { return pick(log_softmax(x), 2); }, 5, -3, 3);
    run([](Graph&, Var x) { return l2_norm(x); }, 5, 0.5, 2.0);
    run([](Graph&, Var x) { return pick(l2_normalize(x), 0); }, 5, 0.5, 2.0);
    run([](Graph&, Var x) { return sum_all(square(pairwise_diff(x))); }, 5, -2, 2);
  }

  SUBCASE("linear algebra") {
    run(
        [](Graph&, Var x) {
          // interpret the 12 inputs as a 3x4 matrix; contract both ways
          Var m = stack_rows({concat({pick(x, 0), pick(x, 1), pick(x, 2), pick(x, 3)}),
                              concat({pick(x, 4), pick(x, 5), pick(x, 6), pick(x, 7)}),
                              concat({pick(x, 8), pick(x, 9), pick(x, 10), pick(x, 11)})});
          Var mtm = matmul_nt(m, m);
          return sum_all(square(softmax_rows(mtm)));
        },
        12, -1.5, 1.5);
    run(
        [](Graph&, Var x) {
          Var a = stack_rows({concat({pick(x, 0), pick(x, 1)}), concat({pick(x, 2), pick(x, 3)})});
          Var v = concat({pick(x, 4), pick(x, 5)});
          return add(dot(matvec(a, v), v), sum_all(matvec_t(a, v)));
        },
        6, -2, 2);
    run(
        [](Graph&, Var x) {
          Var gain = concat({pick(x, 6), pick(x, 7), pick(x, 8)});
          Var bias = concat({pick(x, 9), pick(x, 10), pick(x, 11)});
          Var m = stack_rows({concat({pick(x, 0), pick(x, 1), pick(x, 2)}),
                              concat({pick(x, 3), pick(x, 4), pick(x, 5)})});
          return sum_all(square(layer_norm_rows(m, gain, bias)));
        },
        12, -2, 2);
  }
}

TEST_CASE("softmax cross-entropy composite passes grad_check") {
  Rng rng(91);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> p(6);
    for (double& x : p) x = rng.uniform(-3.0, 3.0);
    auto f = [](Graph&, Var x) { return scale(pick(log_softmax(x), 3), -1.0); };
    CHECK(grad_check(f, p) < 1e-4);
  }
}

TEST_CASE("linear function gradient is near exact") {
  std::vector<double> p = {0.3, -0.7, 1.1};
  auto f = [](Graph& g, Var x) { return dot(x, g.leaf(Tensor::vec({2.0, -1.0, 0.5}))); };
  CHECK(grad_check(f, p) < 1e-8);
}

TEST_CASE("forward and backward are deterministic") {
  auto run_once = [](std::uint64_t seed) {
    Rng rng(seed);
    Tensor a = random_tensor(rng, {8, 8});
    Tensor x = random_tensor(rng, {8});
    Graph g;
    Var av = g.leaf(a);
    Var xv = g.leaf(x);
    Var loss = mean_all(square(tanh_op(matvec(av, xv))));
    g.backward(loss);
    std::vector<double> out;
    out.push_back(g.value(loss)[0]);
    for (double v : g.grad(av).data) out.push_back(v);
    for (double v : g.grad(xv).data) out.push_back(v);
    return out;
  };
  auto r1 = run_once(123);
  auto r2 = run_once(123);
  REQUIRE(r1.size() == r2.size());
  for (std::size_t i = 0; i < r1.size(); ++i) CHECK(r1[i] == r2[i]);
}

TEST_CASE("adam leaves parameters unchanged on zero gradient") {
  ParamTensor p{"p", Tensor::vec({1.0, -2.0})};
  std::vector<ParamTensor*> params = {&p};
  AdamState st;
  st.init(params);
  Tensor zero = Tensor::zeros({2});
  adam_step(AdamConfig{}, st, params, {&zero});
  CHECK(p.value[0] == 1.0);
  CHECK(p.value[1] == -2.0);
  CHECK(st.step == 1);
}

TEST_CASE("first adam step moves against the gradient sign") {
  ParamTensor p{"p", Tensor::vec({0.5})};
  std::vector<ParamTensor*> params = {&p};
  AdamState st;
  st.init(params);
  Tensor grad = Tensor::vec({3.0});
  adam_step(AdamConfig{}, st, params, {&grad});
  CHECK(p.value[0] < 0.5);
}

TEST_CASE("adam drives a quadratic to its minimum, matching a scalar oracle") {
  // Oracle: the same recurrence run on plain doubles, independent of the
  // graph machinery.
  AdamConfig cfg;
  cfg.lr = 0.1;
  double xo = 0.0, mo = 0.0, vo = 0.0;
  for (int t = 1; t <= 200; ++t) {
    const double go = 2.0 * (xo - 3.0);
    mo = cfg.beta1 * mo + (1 - cfg.beta1) * go;
    vo = cfg.beta2 * vo + (1 - cfg.beta2) * go * go;
    const double mhat = mo / (1 - std::pow(cfg.beta1, t));
    const double vhat = vo / (1 - std::pow(cfg.beta2, t));
    xo -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
  REQUIRE(std::abs(xo - 3.0) < 0.1);

  ParamTensor p{"x", Tensor::vec({0.0})};
  std::vector<ParamTensor*> params = {&p};
  AdamState st;
  st.init(params);
  for (int t = 0; t < 200; ++t) {
    Graph g;
    Var x = g.param(p);
    Var loss = square(add_const(x, -3.0));
    g.backward(loss);
    Tensor grad = g.param_grad(p);
    adam_step(cfg, st, params, {&grad});
  }
  CHECK(std::abs(p.value[0] - 3.0) < 0.1);
  CHECK(p.value[0] == doctest::Approx(xo).epsilon(1e-12));
}

TEST_CASE("rng replays identical sequences and normal moments look sane") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(7);
  double mean = 0.0, var = 0.0;
  const int n = 20000;
  std::vector<double> xs(n);
  for (int i = 0; i < n; ++i) {
    xs[i] = c.normal();
    mean += xs[i];
  }
  mean /= n;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= n;
  CHECK(std::abs(mean) < 0.05);
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("non-recording graphs evaluate but refuse backward") {
  Graph g(false);
  Var x = g.leaf(Tensor::vec({1.0, 2.0}));
  Var loss = sum_all(square(x));
  CHECK(g.value(loss)[0] == doctest::Approx(5.0));
  CHECK_THROWS_AS(g.backward(loss), Error);
}
