#include "ltr/graph.hpp"

#include <algorithm>
#include <cmath>

#include "ltr/kernels.hpp"

namespace ltr {

namespace {

void require_same_graph(Var a, Var b, const char* op) {
  if (a.g == nullptr || b.g == nullptr || a.g != b.g)
    throw Error(std::string(op) + ": operands belong to different graphs");
}

void require_rank(const Tensor& t, int rank, const char* op) {
  if (t.rank() != rank)
    throw ShapeError(std::string(op) + ": expected rank-" + std::to_string(rank) + " operand, got " +
                     shape_str(t.shape));
}

}  // namespace

void Graph::reset() {
  nodes_.clear();
  param_nodes_.clear();
}

int Graph::add_node(Node n) {
  if (!recording_) {
    // Value-only mode: keep the result, drop the backward metadata.
    n.in.clear();
    n.aux = Tensor();
    n.aux2 = Tensor();
  }
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Var Graph::leaf(Tensor value) {
  Node n;
  n.op = Op::Leaf;
  n.val = std::move(value);
  return {add_node(std::move(n)), this};
}

Var Graph::param(ParamTensor& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return {it->second, this};
  Node n;
  n.op = Op::Leaf;
  n.val = p.value;
  n.param = &p;
  int id = static_cast<int>(nodes_.size());
  nodes_.push_back(std::move(n));  // keep param binding even when not recording
  param_nodes_.emplace(&p, id);
  return {id, this};
}

Var Graph::detach(Var v) { return leaf(value(v)); }

const Tensor& Graph::value(Var v) const { return node(v.id).val; }

const Tensor& Graph::grad(Var v) const { return node(v.id).grad; }

Tensor Graph::param_grad(const ParamTensor& p) const {
  for (const Node& n : nodes_)
    if (n.param == &p) return n.grad.empty() ? Tensor::zeros(p.value.shape) : n.grad;
  return Tensor::zeros(p.value.shape);
}

Tensor& Graph::ensure_grad(int id) {
  Node& n = node(id);
  if (n.grad.empty()) n.grad = Tensor::zeros(n.val.shape);
  return n.grad;
}

void Graph::backward(Var loss) {
  if (!recording_) throw Error("backward: graph was built with recording disabled");
  if (loss.g != this) throw Error("backward: loss belongs to a different graph");
  const Tensor& lv = value(loss);
  if (lv.numel() != 1)
    throw ShapeError("backward: loss must be scalar, got " + shape_str(lv.shape));
  ensure_grad(loss.id)[0] = 1.0;
  for (int id = loss.id; id >= 0; --id) {
    if (node(id).grad.empty()) continue;
    backprop_node(id);
  }
}

// ---------------------------------------------------------------------------
// op builders

Var make_op(Graph& g, Op op, std::vector<int> in, Tensor val) {
  Graph::Node n;
  n.op = op;
  n.in = std::move(in);
  n.val = std::move(val);
  return {g.add_node(std::move(n)), &g};
}

Var add(Var a, Var b) {
  require_same_graph(a, b, "add");
  const Tensor& av = a.g->value(a);
  const Tensor& bv = b.g->value(b);
  require_same_shape(av, bv, "add");
  Tensor out = av;
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] += bv[i];
  return make_op(*a.g, Op::Add, {a.id, b.id}, std::move(out));
}

Var add_bias(Var m, Var b) {
  require_same_graph(m, b, "add_bias");
  const Tensor& mv = m.g->value(m);
  const Tensor& bv = b.g->value(b);
  require_rank(mv, 2, "add_bias");
  require_rank(bv, 1, "add_bias");
  if (mv.cols() != bv.len())
    throw ShapeError("add_bias: shape mismatch " + shape_str(mv.shape) + " vs " +
                     shape_str(bv.shape));
  Tensor out = mv;
  for (int r = 0; r < mv.rows(); ++r)
    for (int c = 0; c < mv.cols(); ++c) out.at(r, c) += bv[c];
  return make_op(*m.g, Op::AddBias, {m.id, b.id}, std::move(out));
}

Var add_scalar(Var t, Var s) {
  require_same_graph(t, s, "add_scalar");
  const Tensor& tv = t.g->value(t);
  const Tensor& sv = s.g->value(s);
  if (sv.numel() != 1)
    throw ShapeError("add_scalar: second operand must be scalar, got " + shape_str(sv.shape));
  Tensor out = tv;
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] += sv[0];
  return make_op(*t.g, Op::AddScalarT, {t.id, s.id}, std::move(out));
}

Var sub(Var a, Var b) {
  require_same_graph(a, b, "sub");
  const Tensor& av = a.g->value(a);
  const Tensor& bv = b.g->value(b);
  require_same_shape(av, bv, "sub");
  Tensor out = av;
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] -= bv[i];
  return make_op(*a.g, Op::Sub, {a.id, b.id}, std::move(out));
}

Var mul(Var a, Var b) {
  require_same_graph(a, b, "mul");
  const Tensor& av = a.g->value(a);
  const Tensor& bv = b.g->value(b);
  require_same_shape(av, bv, "mul");
  Tensor out = av;
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] *= bv[i];
  return make_op(*a.g, Op::Mul, {a.id, b.id}, std::move(out));
}

Var scale(Var a, double c) {
  Tensor out = a.g->value(a);
  for (double& x : out.data) x *= c;
  Var r = make_op(*a.g, Op::Scale, {a.id}, std::move(out));
  r.g->node(r.id).c = c;
  return r;
}

Var add_const(Var a, double c) {
  Tensor out = a.g->value(a);
  for (double& x : out.data) x += c;
  Var r = make_op(*a.g, Op::AddConst, {a.id}, std::move(out));
  r.g->node(r.id).c = c;
  return r;
}

Var matmul(Var a, Var b) {
  require_same_graph(a, b, "matmul");
  const Tensor& av = a.g->value(a);
  const Tensor& bv = b.g->value(b);
  require_rank(av, 2, "matmul");
  require_rank(bv, 2, "matmul");
  if (av.cols() != bv.rows())
    throw ShapeError("matmul: shape mismatch " + shape_str(av.shape) + " vs " +
                     shape_str(bv.shape));
  Tensor out = Tensor::zeros({av.rows(), bv.cols()});
  kern::matmul(av.data.data(), av.rows(), av.cols(), bv.data.data(), bv.cols(), out.data.data());
  return make_op(*a.g, Op::MatMul, {a.id, b.id}, std::move(out));
}

Var matmul_nt(Var a, Var b) {
  require_same_graph(a, b, "matmul_nt");
  const Tensor& av = a.g->value(a);
  const Tensor& bv = b.g->value(b);
  require_rank(av, 2, "matmul_nt");
  require_rank(bv, 2, "matmul_nt");
  if (av.cols() != bv.cols())
    throw ShapeError("matmul_nt: shape mismatch " + shape_str(av.shape) + " vs " +
                     shape_str(bv.shape));
  Tensor out = Tensor::zeros({av.rows(), bv.rows()});
  kern::matmul_nt(av.data.data(), av.rows(), av.cols(), bv.data.data(), bv.rows(),
                  out.data.data());
  return make_op(*a.g, Op::MatMulNT, {a.id, b.id}, std::move(out));
}

Var matvec(Var a, Var x) {
  require_same_graph(a, x, "matvec");
  const Tensor& av = a.g->value(a);
  const Tensor& xv = x.g->value(x);
  require_rank(av, 2, "matvec");
  require_rank(xv, 1, "matvec");
  if (av.cols() != xv.len())
    throw ShapeError("matvec: shape mismatch " + shape_str(av.shape) + " vs " +
                     shape_str(xv.shape));
  Tensor out = Tensor::zeros({av.rows()});
  kern::matvec(av.data.data(), av.rows(), av.cols(), xv.data.data(), out.data.data());
  return make_op(*a.g, Op::MatVec, {a.id, x.id}, std::move(out));
}

Var matvec_t(Var a, Var x) {
  require_same_graph(a, x, "matvec_t");
  const Tensor& av = a.g->value(a);
  const Tensor& xv = x.g->value(x);
  require_rank(av, 2, "matvec_t");
  require_rank(xv, 1, "matvec_t");
  if (av.rows() != xv.len())
    throw ShapeError("matvec_t: shape mismatch " + shape_str(av.shape) + " vs " +
                     shape_str(xv.shape));
  Tensor out = Tensor::zeros({av.cols()});
  kern::matvec_t(av.data.data(), av.rows(), av.cols(), xv.data.data(), out.data.data());
  return make_op(*a.g, Op::MatVecT, {a.id, x.id}, std::move(out));
}

Var dot(Var u, Var v) {
  require_same_graph(u, v, "dot");
  const Tensor& uv = u.g->value(u);
  const Tensor& vv = v.g->value(v);
  require_rank(uv, 1, "dot");
  require_same_shape(uv, vv, "dot");
  double s = kern::dot(uv.data.data(), vv.data.data(), uv.len());
  return make_op(*u.g, Op::Dot, {u.id, v.id}, Tensor::scalar(s));
}

Var concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat: empty part list");
  Graph* g = parts[0].g;
  std::vector<int> in;
  std::vector<double> data;
  for (Var p : parts) {
    require_same_graph(parts[0], p, "concat");
    const Tensor& t = g->value(p);
    require_rank(t, 1, "concat");
    data.insert(data.end(), t.data.begin(), t.data.end());
    in.push_back(p.id);
  }
  return make_op(*g, Op::Concat, std::move(in), Tensor::vec(std::move(data)));
}

Var stack_rows(const std::vector<Var>& rows) {
  if (rows.empty()) throw ShapeError("stack_rows: empty row list");
  Graph* g = rows[0].g;
  const int cols = g->value(rows[0]).len();
  std::vector<int> in;
  std::vector<double> data;
  for (Var r : rows) {
    require_same_graph(rows[0], r, "stack_rows");
    const Tensor& t = g->value(r);
    if (t.rank() != 1 || t.len() != cols)
      throw ShapeError("stack_rows: row shape mismatch " + shape_str({cols}) + " vs " +
                       shape_str(t.shape));
    data.insert(data.end(), t.data.begin(), t.data.end());
    in.push_back(r.id);
  }
  return make_op(*g, Op::StackRows, std::move(in),
                 Tensor::mat(static_cast<int>(rows.size()), cols, std::move(data)));
}

Var concat_cols(const std::vector<Var>& blocks) {
  if (blocks.empty()) throw ShapeError("concat_cols: empty block list");
  Graph* g = blocks[0].g;
  const int rows = g->value(blocks[0]).rows();
  int total_cols = 0;
  std::vector<int> in;
  for (Var b : blocks) {
    require_same_graph(blocks[0], b, "concat_cols");
    const Tensor& t = g->value(b);
    require_rank(t, 2, "concat_cols");
    if (t.rows() != rows)
      throw ShapeError("concat_cols: row count mismatch " + shape_str(g->value(blocks[0]).shape) +
                       " vs " + shape_str(t.shape));
    total_cols += t.cols();
    in.push_back(b.id);
  }
  Tensor out = Tensor::zeros({rows, total_cols});
  int col0 = 0;
  for (Var b : blocks) {
    const Tensor& t = g->value(b);
    for (int r = 0; r < rows; ++r)
      std::copy(t.row_ptr(r), t.row_ptr(r) + t.cols(), out.row_ptr(r) + col0);
    col0 += t.cols();
  }
  return make_op(*g, Op::ConcatCols, std::move(in), std::move(out));
}

Var embed(Var table, const std::vector<int>& ids) {
  const Tensor& tv = table.g->value(table);
  require_rank(tv, 2, "embed");
  if (ids.empty()) throw ShapeError("embed: empty id list");
  Tensor out = Tensor::zeros({static_cast<int>(ids.size()), tv.cols()});
  for (std::size_t j = 0; j < ids.size(); ++j) {
    int id = ids[j];
    if (id < 0 || id >= tv.rows())
      throw Error("embed: row id " + std::to_string(id) + " out of range [0, " +
                  std::to_string(tv.rows()) + ")");
    std::copy(tv.row_ptr(id), tv.row_ptr(id) + tv.cols(), out.row_ptr(static_cast<int>(j)));
  }
  Var r = make_op(*table.g, Op::Embed, {table.id}, std::move(out));
  r.g->node(r.id).idx = ids;
  return r;
}

namespace {

void softmax_inplace(const double* x, double* y, int n) {
  double mx = x[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, x[i]);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    y[i] = std::exp(x[i] - mx);
    sum += y[i];
  }
  for (int i = 0; i < n; ++i) y[i] /= sum;
}

}  // namespace

Var softmax(Var v) {
  const Tensor& xv = v.g->value(v);
  require_rank(xv, 1, "softmax");
  Tensor out = Tensor::zeros(xv.shape);
  softmax_inplace(xv.data.data(), out.data.data(), xv.len());
  return make_op(*v.g, Op::Softmax, {v.id}, std::move(out));
}

Var softmax_rows(Var m) {
  const Tensor& xv = m.g->value(m);
  require_rank(xv, 2, "softmax_rows");
  Tensor out = Tensor::zeros(xv.shape);
  for (int r = 0; r < xv.rows(); ++r)
    softmax_inplace(xv.row_ptr(r), out.row_ptr(r), xv.cols());
  return make_op(*m.g, Op::SoftmaxRows, {m.id}, std::move(out));
}

Var log_softmax(Var v) {
  const Tensor& xv = v.g->value(v);
  require_rank(xv, 1, "log_softmax");
  const int n = xv.len();
  double mx = xv[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, xv[i]);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += std::exp(xv[i] - mx);
  const double lse = mx + std::log(sum);
  Tensor out = Tensor::zeros(xv.shape);
  for (int i = 0; i < n; ++i) out[i] = xv[i] - lse;
  return make_op(*v.g, Op::LogSoftmax, {v.id}, std::move(out));
}

Var logsumexp(Var v) {
  const Tensor& xv = v.g->value(v);
  require_rank(xv, 1, "logsumexp");
  const int n = xv.len();
  double mx = xv[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, xv[i]);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += std::exp(xv[i] - mx);
  return make_op(*v.g, Op::LogSumExp, {v.id}, Tensor::scalar(mx + std::log(sum)));
}

Var pick(Var v, int i) {
  const Tensor& xv = v.g->value(v);
  require_rank(xv, 1, "pick");
  if (i < 0 || i >= xv.len())
    throw Error("pick: index " + std::to_string(i) + " out of range for " + shape_str(xv.shape));
  Var r = make_op(*v.g, Op::Pick, {v.id}, Tensor::scalar(xv[i]));
  r.g->node(r.id).idx = {i};
  return r;
}

namespace {

template <typename Fn>
Var elementwise(Var v, Op op, Fn&& fn) {
  Tensor out = v.g->value(v);
  for (double& x : out.data) x = fn(x);
  return make_op(*v.g, op, {v.id}, std::move(out));
}

}  // namespace

Var sigmoid(Var v) {
  return elementwise(v, Op::Sigmoid, [](double x) {
    // Evaluate through exp of a non-positive argument only.
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
}

Var tanh_op(Var v) {
  return elementwise(v, Op::Tanh, [](double x) { return std::tanh(x); });
}

Var log_op(Var v) {
  const Tensor& xv = v.g->value(v);
  for (double x : xv.data)
    if (x <= 0.0) throw Error("log: non-positive input " + std::to_string(x));
  return elementwise(v, Op::Log, [](double x) { return std::log(x); });
}

Var exp_op(Var v) {
  return elementwise(v, Op::Exp, [](double x) { return std::exp(x); });
}

Var square(Var v) {
  return elementwise(v, Op::Square, [](double x) { return x * x; });
}

Var inv(Var v) {
  const Tensor& xv = v.g->value(v);
  for (double x : xv.data)
    if (x == 0.0) throw Error("inv: division by zero");
  return elementwise(v, Op::Inv, [](double x) { return 1.0 / x; });
}

Var sum_all(Var v) {
  const Tensor& xv = v.g->value(v);
  double s = 0.0;
  for (double x : xv.data) s += x;
  return make_op(*v.g, Op::SumAll, {v.id}, Tensor::scalar(s));
}

Var mean_all(Var v) {
  const Tensor& xv = v.g->value(v);
  double s = 0.0;
  for (double x : xv.data) s += x;
  return make_op(*v.g, Op::MeanAll, {v.id},
                 Tensor::scalar(s / static_cast<double>(xv.numel())));
}

Var row_sum(Var m) {
  const Tensor& xv = m.g->value(m);
  require_rank(xv, 2, "row_sum");
  Tensor out = Tensor::zeros({xv.rows()});
  for (int r = 0; r < xv.rows(); ++r) {
    double s = 0.0;
    const double* p = xv.row_ptr(r);
    for (int c = 0; c < xv.cols(); ++c) s += p[c];
    out[r] = s;
  }
  return make_op(*m.g, Op::RowSum, {m.id}, std::move(out));
}

Var layer_norm_rows(Var x, Var gain, Var bias) {
  require_same_graph(x, gain, "layer_norm_rows");
  require_same_graph(x, bias, "layer_norm_rows");
  const Tensor& xv = x.g->value(x);
  const Tensor& gv = x.g->value(gain);
  const Tensor& bv = x.g->value(bias);
  require_rank(xv, 2, "layer_norm_rows");
  if (gv.rank() != 1 || bv.rank() != 1 || gv.len() != xv.cols() || bv.len() != xv.cols())
    throw ShapeError("layer_norm_rows: affine shape mismatch " + shape_str(xv.shape) + " vs " +
                     shape_str(gv.shape) + "/" + shape_str(bv.shape));
  const int rows = xv.rows(), cols = xv.cols();
  Tensor out = Tensor::zeros(xv.shape);
  Tensor xhat = Tensor::zeros(xv.shape);
  Tensor inv_std = Tensor::zeros({rows});
  for (int r = 0; r < rows; ++r) {
    const double* p = xv.row_ptr(r);
    double mean = 0.0;
    for (int c = 0; c < cols; ++c) mean += p[c];
    mean /= cols;
    double var = 0.0;
    for (int c = 0; c < cols; ++c) var += (p[c] - mean) * (p[c] - mean);
    var /= cols;
    const double is = 1.0 / std::sqrt(var + kLayerNormEps);
    inv_std[r] = is;
    for (int c = 0; c < cols; ++c) {
      const double xh = (p[c] - mean) * is;
      xhat.at(r, c) = xh;
      out.at(r, c) = gv[c] * xh + bv[c];
    }
  }
  Var res = make_op(*x.g, Op::LayerNormRows, {x.id, gain.id, bias.id}, std::move(out));
  if (res.g->recording()) {
    res.g->node(res.id).aux = std::move(xhat);
    res.g->node(res.id).aux2 = std::move(inv_std);
  }
  return res;
}

Var l2_normalize(Var v) {
  const Tensor& xv = v.g->value(v);
  require_rank(xv, 1, "l2_normalize");
  double n2 = kern::dot(xv.data.data(), xv.data.data(), xv.len());
  if (n2 == 0.0) throw Error("l2_normalize: zero vector");
  const double n = std::sqrt(n2);
  Tensor out = xv;
  for (double& x : out.data) x /= n;
  Var r = make_op(*v.g, Op::L2Normalize, {v.id}, std::move(out));
  r.g->node(r.id).c = n;
  return r;
}

Var l2_norm(Var v) {
  const Tensor& xv = v.g->value(v);
  require_rank(xv, 1, "l2_norm");
  double n2 = kern::dot(xv.data.data(), xv.data.data(), xv.len());
  return make_op(*v.g, Op::L2Norm, {v.id}, Tensor::scalar(std::sqrt(n2)));
}

Var pairwise_diff(Var s) {
  const Tensor& xv = s.g->value(s);
  require_rank(xv, 1, "pairwise_diff");
  const int k = xv.len();
  Tensor out = Tensor::zeros({k, k});
  for (int j = 0; j < k; ++j)
    for (int l = 0; l < k; ++l) out.at(j, l) = xv[l] - xv[j];
  return make_op(*s.g, Op::PairwiseDiff, {s.id}, std::move(out));
}

// ---------------------------------------------------------------------------
// backward rules

void Graph::backprop_node(int id) {
  const Node& n = node(id);
  const Tensor& g = n.grad;
  switch (n.op) {
    case Op::Leaf:
      break;
    case Op::Add: {
      Tensor& ga = ensure_grad(n.in[0]);
      Tensor& gb = ensure_grad(n.in[1]);
      for (std::int64_t i = 0; i < g.numel(); ++i) {
        ga[i] += g[i];
        gb[i] += g[i];
      }
      break;
    }
    case Op::AddBias: {
      Tensor& gm = ensure_grad(n.in[0]);
      Tensor& gb = ensure_grad(n.in[1]);
      const int rows = n.val.rows(), cols = n.val.cols();
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
          gm.at(r, c) += g.at(r, c);
          gb[c] += g.at(r, c);
        }
      break;
    }
    case Op::AddScalarT: {
      Tensor& gt = ensure_grad(n.in[0]);
      Tensor& gs = ensure_grad(n.in[1]);
      double s = 0.0;
      for (std::int64_t i = 0; i < g.numel(); ++i) {
        gt[i] += g[i];
        s += g[i];
      }
      gs[0] += s;
      break;
    }
    case Op::Sub: {
      Tensor& ga = ensure_grad(n.in[0]);
      Tensor& gb = ensure_grad(n.in[1]);
      for (std::int64_t i = 0; i < g.numel(); ++i) {
        ga[i] += g[i];
        gb[i] -= g[i];
      }
      break;
    }
    case Op::Mul: {
      const Tensor& av = node(n.in[0]).val;
      const Tensor& bv = node(n.in[1]).val;
      Tensor& ga = ensure_grad(n.in[0]);
      Tensor& gb = ensure_grad(n.in[1]);
      for (std::int64_t i = 0; i < g.numel(); ++i) {
        ga[i] += g[i] * bv[i];
        gb[i] += g[i] * av[i];
      }
      break;
    }
    case Op::Scale: {
      Tensor& ga = ensure_grad(n.in[0]);
      for (std::int64_t i = 0; i < g.numel(); ++i) ga[i] += n.c * g[i];
      break;
    }
    case Op::AddConst: {
      Tensor& ga = ensure_grad(n.in[0]);
      for (std::int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
      break;
    }
    case Op::MatMul: {
      const Tensor& av = node(n.in[0]).val;
      const Tensor& bv = node(n.in[1]).val;
      Tensor& ga = ensure_grad(n.in[0]);
      Tensor& gb = ensure_grad(n.in[1]);
      // dA += dC * B^T ; dB += A^T * dC
      Tensor da = Tensor::zeros(av.shape);
      kern::matmul_nt(g.data.data(), g.rows(), g.cols(), bv.data.data(), bv.rows(),
                      da.data.data());
      for (std::int64_t i = 0; i < da.numel(); ++i) ga[i] += da[i];
      Tensor db = Tensor::zeros(bv.shape);
      kern::matmul_tn(av.data.data(), av.rows(), av.cols(), g.data.data(), g.cols(),
                      db.data.data());
      for (std::int64_t i = 0; i < db.numel(); ++i) gb[i] += db[i];
      break;
    }
    case Op::MatMulNT: {
      const Tensor& av = node(n.in[0]).val;
      const Tensor& bv = node(n.in[1]).val;
      Tensor& ga = ensure_grad(n.in[0]);
      Tensor& gb = ensure_grad(n.in[1]);
      // C = A*B^T: dA += dC * B ; dB += dC^T * A
      Tensor da = Tensor::zeros(av.shape);
      kern::matmul(g.data.data(), g.rows(), g.cols(), bv.data.data(), bv.cols(), da.data.data());
      for (std::int64_t i = 0; i < da.numel(); ++i) ga[i] += da[i];
      Tensor db = Tensor::zeros(bv.shape);
      kern::matmul_tn(g.data.data(), g.rows(), g.cols(), av.data.data(), av.cols(),
                      db.data.data());
      for (std::int64_t i = 0; i < db.numel(); ++i) gb[i] += db[i];
      break;
    }
    case Op::MatVec: {
      const Tensor& av = node(n.in[0]).val;
      const Tensor& xv = node(n.in[1]).val;
      Tensor& ga = ensure_grad(n.in[0]);
      Tensor& gx = ensure_grad(n.in[1]);
      const int r = av.rows(), c = av.cols();
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) ga.at(i, j) += g[i] * xv[j];
      Tensor dx = Tensor::zeros({c});
      kern::matvec_t(av.data.data(), r, c, g.data.data(), dx.data.data());
      for (int j = 0; j < c; ++j) gx[j] += dx[j];
      break;
    }
    case Op::MatVecT: {
      const Tensor& av = node(n.in[0]).val;
      const Tensor& xv = node(n.in[1]).val;
      Tensor& ga = ensure_grad(n.in[0]);
      Tensor& gx = ensure_grad(n.in[1]);
      const int r = av.rows(), c = av.cols();
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) ga.at(i, j) += xv[i] * g[j];
      Tensor dx = Tensor::zeros({r});
      kern::matvec(av.data.data(), r, c, g.data.data(), dx.data.data());
      for (int i = 0; i < r; ++i) gx[i] += dx[i];
      break;
    }
    case Op::Dot: {
      const Tensor& uv = node(n.in[0]).val;
      const Tensor& vv = node(n.in[1]).val;
      Tensor& gu = ensure_grad(n.in[0]);
      Tensor& gv = ensure_grad(n.in[1]);
      const double gs = g[0];
      for (int i = 0; i < uv.len(); ++i) {
        gu[i] += gs * vv[i];
        gv[i] += gs * uv[i];
      }
      break;
    }
    case Op::Concat: {
      std::int64_t off = 0;
      for (int in_id : n.in) {
        Tensor& gi = ensure_grad(in_id);
        for (std::int64_t i = 0; i < gi.numel(); ++i) gi[i] += g[off + i];
        off += gi.numel();
      }
      break;
    }
    case Op::StackRows: {
      const int cols = n.val.cols();
      for (std::size_t r = 0; r < n.in.size(); ++r) {
        Tensor& gi = ensure_grad(n.in[r]);
        const double* gr = g.row_ptr(static_cast<int>(r));
        for (int c = 0; c < cols; ++c) gi[c] += gr[c];
      }
      break;
    }
    case Op::ConcatCols: {
      const int rows = n.val.rows();
      int col0 = 0;
      for (int in_id : n.in) {
        Tensor& gi = ensure_grad(in_id);
        const int bc = gi.cols();
        for (int r = 0; r < rows; ++r)
          for (int c = 0; c < bc; ++c) gi.at(r, c) += g.at(r, col0 + c);
        col0 += bc;
      }
      break;
    }
    case Op::Embed: {
      Tensor& gt = ensure_grad(n.in[0]);
      const int cols = n.val.cols();
      for (std::size_t j = 0; j < n.idx.size(); ++j) {
        const double* gr = g.row_ptr(static_cast<int>(j));
        double* tr = gt.row_ptr(n.idx[j]);
        for (int c = 0; c < cols; ++c) tr[c] += gr[c];
      }
      break;
    }
    case Op::Softmax: {
      Tensor& gx = ensure_grad(n.in[0]);
      const Tensor& y = n.val;
      double inner = 0.0;
      for (int i = 0; i < y.len(); ++i) inner += g[i] * y[i];
      for (int i = 0; i < y.len(); ++i) gx[i] += y[i] * (g[i] - inner);
      break;
    }
    case Op::SoftmaxRows: {
      Tensor& gx = ensure_grad(n.in[0]);
      const Tensor& y = n.val;
      for (int r = 0; r < y.rows(); ++r) {
        const double* yr = y.row_ptr(r);
        const double* gr = g.row_ptr(r);
        double inner = 0.0;
        for (int c = 0; c < y.cols(); ++c) inner += gr[c] * yr[c];
        double* gxr = gx.row_ptr(r);
        for (int c = 0; c < y.cols(); ++c) gxr[c] += yr[c] * (gr[c] - inner);
      }
      break;
    }
    case Op::LogSoftmax: {
      Tensor& gx = ensure_grad(n.in[0]);
      const Tensor& y = n.val;  // log-probabilities
      double gsum = 0.0;
      for (int i = 0; i < y.len(); ++i) gsum += g[i];
      for (int i = 0; i < y.len(); ++i) gx[i] += g[i] - std::exp(y[i]) * gsum;
      break;
    }
    case Op::LogSumExp: {
      Tensor& gx = ensure_grad(n.in[0]);
      const Tensor& x = node(n.in[0]).val;
      const double lse = n.val[0];
      const double gs = g[0];
      for (int i = 0; i < x.len(); ++i) gx[i] += gs * std::exp(x[i] - lse);
      break;
    }
    case Op::Pick: {
      Tensor& gx = ensure_grad(n.in[0]);
      gx[n.idx[0]] += g[0];
      break;
    }
    case Op::Sigmoid: {
      Tensor& gx = ensure_grad(n.in[0]);
      const Tensor& y = n.val;
      for (std::int64_t i = 0; i < y.numel(); ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
      break;
    }
    case Op::Tanh: {
      Tensor& gx = ensure_grad(n.in[0]);
      const Tensor& y = n.val;
      for (std::int64_t i = 0; i < y.numel(); ++i) gx[i] += g[i] * (1.0 - y[i] * y[i]);
      break;
    }
    case Op::Log: {
      Tensor& gx = ensure_grad(n.in[0]);
      const Tensor& x = node(n.in[0]).val;
      for (std::int64_t i = 0; i < x.numel(); ++i) gx[i] += g[i] / x[i];
      break;
    }
    case Op::Exp: {
      Tensor& gx = ensure_grad(n.in[0]);
      const Tensor& y = n.val;
      for (std::int64_t i = 0; i < y.numel(); ++i) gx[i] += g[i] * y[i];
      break;
    }
    case Op::Square: {
      Tensor& gx = ensure_grad(n.in[0]);
      const Tensor& x = node(n.in[0]).val;
      for (std::int64_t i = 0; i < x.numel(); ++i) gx[i] += 2.0 * x[i] * g[i];
      break;
    }
    case Op::Inv: {
      Tensor& gx = ensure_grad(n.in[0]);
      const Tensor& y = n.val;
      for (std::int64_t i = 0; i < y.numel(); ++i) gx[i] -= g[i] * y[i] * y[i];
      break;
    }
    case Op::SumAll: {
      Tensor& gx = ensure_grad(n.in[0]);
      const double gs = g[0];
      for (std::int64_t i = 0; i < gx.numel(); ++i) gx[i] += gs;
      break;
    }
    case Op::MeanAll: {
      Tensor& gx = ensure_grad(n.in[0]);
      const double gs = g[0] / static_cast<double>(gx.numel());
      for (std::int64_t i = 0; i < gx.numel(); ++i) gx[i] += gs;
      break;
    }
    case Op::RowSum: {
      Tensor& gx = ensure_grad(n.in[0]);
      for (int r = 0; r < gx.rows(); ++r) {
        double* gr = gx.row_ptr(r);
        for (int c = 0; c < gx.cols(); ++c) gr[c] += g[r];
      }
      break;
    }
    case Op::LayerNormRows: {
      Tensor& gx = ensure_grad(n.in[0]);
      Tensor& gg = ensure_grad(n.in[1]);
      Tensor& gb = ensure_grad(n.in[2]);
      const Tensor& gain = node(n.in[1]).val;
      const Tensor& xhat = n.aux;
      const Tensor& inv_std = n.aux2;
      const int rows = n.val.rows(), cols = n.val.cols();
      for (int r = 0; r < rows; ++r) {
        const double* gr = g.row_ptr(r);
        const double* xh = xhat.row_ptr(r);
        double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
        for (int c = 0; c < cols; ++c) {
          const double dxh = gr[c] * gain[c];
          mean_dxhat += dxh;
          mean_dxhat_xhat += dxh * xh[c];
          gg[c] += gr[c] * xh[c];
          gb[c] += gr[c];
        }
        mean_dxhat /= cols;
        mean_dxhat_xhat /= cols;
        double* gxr = gx.row_ptr(r);
        const double is = inv_std[r];
        for (int c = 0; c < cols; ++c) {
          const double dxh = gr[c] * gain[c];
          gxr[c] += is * (dxh - mean_dxhat - xh[c] * mean_dxhat_xhat);
        }
      }
      break;
    }
    case Op::L2Normalize: {
      Tensor& gx = ensure_grad(n.in[0]);
      const Tensor& y = n.val;
      const double norm = n.c;
      double inner = 0.0;
      for (int i = 0; i < y.len(); ++i) inner += g[i] * y[i];
      for (int i = 0; i < y.len(); ++i) gx[i] += (g[i] - y[i] * inner) / norm;
      break;
    }
    case Op::L2Norm: {
      Tensor& gx = ensure_grad(n.in[0]);
      const Tensor& x = node(n.in[0]).val;
      const double s = n.val[0];
      if (s == 0.0) throw Error("l2_norm: gradient undefined at zero vector");
      const double gs = g[0] / s;
      for (int i = 0; i < x.len(); ++i) gx[i] += gs * x[i];
      break;
    }
    case Op::PairwiseDiff: {
      Tensor& gs = ensure_grad(n.in[0]);
      const int k = n.val.rows();
      for (int j = 0; j < k; ++j) {
        const double* gr = g.row_ptr(j);
        double row_total = 0.0;
        for (int l = 0; l < k; ++l) {
          gs[l] += gr[l];
          row_total += gr[l];
        }
        gs[j] -= row_total;
      }
      break;
    }
  }
}

}  // namespace ltr
