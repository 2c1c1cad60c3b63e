#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ltr/gradcheck.hpp"
#include "ltr/lt.hpp"
#include "ltr/rng.hpp"

using namespace ltr;
using namespace ltr::lt;

namespace {

LTConfig small_cfg() {
  LTConfig c;
  c.d = 6;
  c.d_r = 3;
  c.d_model = 16;
  c.n_heads = 2;
  c.n_layers = 2;
  c.d_ff = 24;
  return c;
}

struct RawSlate {
  std::vector<double> e_q, r_q;
  std::vector<std::vector<double>> e_items, r_items;
  std::vector<double> tte_scores;
};

RawSlate random_slate(Rng& rng, const LTConfig& c, int k) {
  RawSlate s;
  auto rand_vec = [&](int n) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.normal();
    return v;
  };
  s.e_q = rand_vec(c.d);
  s.r_q = rand_vec(c.d_r);
  for (int j = 0; j < k; ++j) {
    s.e_items.push_back(rand_vec(c.d));
    s.r_items.push_back(rand_vec(c.d_r));
    s.tte_scores.push_back(rng.uniform(-1.0, 1.0));
  }
  return s;
}

SlateInputs to_graph(Graph& g, const RawSlate& s) {
  SlateInputs in;
  in.e_q = g.leaf(Tensor::vec(s.e_q));
  in.r_q = g.leaf(Tensor::vec(s.r_q));
  for (std::size_t j = 0; j < s.e_items.size(); ++j) {
    in.e_items.push_back(g.leaf(Tensor::vec(s.e_items[j])));
    in.r_items.push_back(g.leaf(Tensor::vec(s.r_items[j])));
    in.tte_scores.push_back(g.leaf(Tensor::scalar(s.tte_scores[j])));
  }
  return in;
}

SlateValues to_values(const RawSlate& s) {
  SlateValues v;
  v.e_q = s.e_q.data();
  v.r_q = s.r_q.data();
  for (std::size_t j = 0; j < s.e_items.size(); ++j) {
    v.e_items.push_back(s.e_items[j].data());
    v.r_items.push_back(s.r_items[j].data());
  }
  v.tte_scores = s.tte_scores;
  return v;
}

}  // namespace

TEST_CASE("assembled rows have the documented layout") {
  LTConfig c = small_cfg();
  Rng rng(1);
  RawSlate s = random_slate(rng, c, 4);
  Graph g;
  Var x = assemble_inputs(g, to_graph(g, s));
  const Tensor& xv = g.value(x);
  CHECK(xv.rows() == 4);
  CHECK(xv.cols() == 2 * c.d + 2 * c.d_r + 1);
  // first d entries of every row are e_q
  for (int j = 0; j < 4; ++j)
    for (int a = 0; a < c.d; ++a) CHECK(xv.at(j, a) == s.e_q[a]);
  // a random row matches an independently concatenated vector
  std::vector<double> expect;
  expect.insert(expect.end(), s.e_q.begin(), s.e_q.end());
  expect.insert(expect.end(), s.e_items[2].begin(), s.e_items[2].end());
  expect.insert(expect.end(), s.r_q.begin(), s.r_q.end());
  expect.insert(expect.end(), s.r_items[2].begin(), s.r_items[2].end());
  expect.push_back(s.tte_scores[2]);
  for (int a = 0; a < xv.cols(); ++a) CHECK(xv.at(2, a) == expect[a]);
}

TEST_CASE("assemble rejects incomplete slates") {
  LTConfig c = small_cfg();
  Rng rng(2);
  RawSlate s = random_slate(rng, c, 3);
  Graph g;
  SlateInputs in = to_graph(g, s);
  in.r_items.pop_back();
  CHECK_THROWS_AS(assemble_inputs(g, in), Error);
}

TEST_CASE("single-candidate attention is the 1x1 identity distribution") {
  LTConfig c = small_cfg();
  Rng rng(3);
  LTModel m = LTModel::init(c, rng);
  RawSlate s = random_slate(rng, c, 1);
  Graph g;
  Var x = assemble_inputs(g, to_graph(g, s));
  LTForward fwd = lt_forward(g, m, x, false);
  REQUIRE(!fwd.attention.empty());
  for (Var a : fwd.attention) {
    const Tensor& av = g.value(a);
    REQUIRE(av.rows() == 1);
    REQUIRE(av.cols() == 1);
    CHECK(av.at(0, 0) == 1.0);
  }
  CHECK(g.value(fwd.scores).len() == 1);
}

TEST_CASE("attention rows are distributions") {
  LTConfig c = small_cfg();
  Rng rng(4);
  LTModel m = LTModel::init(c, rng);
  RawSlate s = random_slate(rng, c, 7);
  Graph g;
  LTForward fwd = lt_forward(g, m, assemble_inputs(g, to_graph(g, s)), false);
  for (Var a : fwd.attention) {
    const Tensor& av = g.value(a);
    for (int r = 0; r < av.rows(); ++r) {
      double sum = 0.0;
      for (int col = 0; col < av.cols(); ++col) {
        CHECK(av.at(r, col) > 0.0);
        CHECK(av.at(r, col) < 1.0);
        sum += av.at(r, col);
      }
      CHECK(std::abs(sum - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("zeroed transformer weights reduce the model to the head bias") {
  LTConfig c = small_cfg();
  Rng rng(5);
  LTModel m = LTModel::init(c, rng);
  for (LTLayer& layer : m.layers) {
    for (AttentionHead& h : layer.heads) {
      std::fill(h.wq.value.data.begin(), h.wq.value.data.end(), 0.0);
      std::fill(h.wk.value.data.begin(), h.wk.value.data.end(), 0.0);
      std::fill(h.wv.value.data.begin(), h.wv.value.data.end(), 0.0);
    }
    std::fill(layer.wo.value.data.begin(), layer.wo.value.data.end(), 0.0);
    std::fill(layer.ff1.value.data.begin(), layer.ff1.value.data.end(), 0.0);
    std::fill(layer.ff2.value.data.begin(), layer.ff2.value.data.end(), 0.0);
  }
  std::fill(m.w_score.value.data.begin(), m.w_score.value.data.end(), 0.0);
  const double head_bias = 2.75;
  m.b_score.value[0] = head_bias;
  RawSlate s = random_slate(rng, c, 5);
  std::vector<double> scores = lt_scores_eval(m, to_values(s), false);
  for (double v : scores) CHECK(v == doctest::Approx(head_bias).epsilon(1e-15));
}

TEST_CASE("permutation equivariance with positional encoding off") {
  LTConfig c = small_cfg();
  Rng rng(6);
  LTModel m = LTModel::init(c, rng);
  for (int trial = 0; trial < 100; ++trial) {
    const int k = 2 + static_cast<int>(rng.uniform_below(9));
    RawSlate s = random_slate(rng, c, k);
    std::vector<double> base = lt_scores_eval(m, to_values(s), false);

    std::vector<int> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = k - 1; i > 0; --i)
      std::swap(perm[i], perm[rng.uniform_below(static_cast<std::uint64_t>(i + 1))]);

    RawSlate ps = s;
    for (int j = 0; j < k; ++j) {
      ps.e_items[j] = s.e_items[perm[j]];
      ps.r_items[j] = s.r_items[perm[j]];
      ps.tte_scores[j] = s.tte_scores[perm[j]];
    }
    std::vector<double> permuted = lt_scores_eval(m, to_values(ps), false);
    for (int j = 0; j < k; ++j) CHECK(std::abs(permuted[j] - base[perm[j]]) < 1e-9);
  }
}

TEST_CASE("positional encoding breaks slate-order independence") {
  LTConfig c = small_cfg();
  Rng rng(7);
  LTModel m = LTModel::init(c, rng);
  RawSlate s = random_slate(rng, c, 4);
  std::vector<double> with_pe = lt_scores_eval(m, to_values(s), true);
  std::vector<double> without = lt_scores_eval(m, to_values(s), false);
  double diff = 0.0;
  for (int j = 0; j < 4; ++j) diff = std::max(diff, std::abs(with_pe[j] - without[j]));
  CHECK(diff > 1e-6);
}

TEST_CASE("scores are invariant to item-id relabeling") {
  // Scores are computed from embeddings and tte scores only; ids never
  // enter the forward pass. Identical payloads must give identical bytes.
  LTConfig c = small_cfg();
  Rng rng(8);
  LTModel m = LTModel::init(c, rng);
  RawSlate s = random_slate(rng, c, 6);
  std::vector<double> a = lt_scores_eval(m, to_values(s), false);
  std::vector<double> b = lt_scores_eval(m, to_values(s), false);
  CHECK(a == b);
}

TEST_CASE("lt scores pass a gradient check over all parameters") {
  LTConfig c = small_cfg();
  c.d_model = 8;
  c.n_heads = 2;
  c.n_layers = 1;
  c.d_ff = 8;
  Rng rng(9);
  LTModel m = LTModel::init(c, rng);
  RawSlate s = random_slate(rng, c, 3);
  auto build = [&](Graph& g) {
    LTForward fwd = lt_forward(g, m, assemble_inputs(g, to_graph(g, s)), false);
    // weighted sum of scores plus an alignment-style term so align_w gets a
    // gradient too
    Var weights = g.leaf(Tensor::vec({0.3, -1.1, 0.7}));
    Var zw = matmul_nt(fwd.z_final, g.param(m.align_w));
    return add(dot(fwd.scores, weights), mean_all(square(zw)));
  };
  double err = grad_check_params(build, m.params(), 1e-5);
  CHECK(err < 1e-3);
}
