#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "ltr/tensor.hpp"

namespace ltr {

// A named parameter tensor. Models own these; graphs reference them so
// gradients can be routed back by identity.
struct ParamTensor {
  std::string name;
  Tensor value;
};

enum class Op : std::uint8_t {
  Leaf,
  Add,          // same shape
  AddBias,      // matrix + row vector
  AddScalarT,   // tensor + scalar tensor
  Sub,          // same shape
  Mul,          // elementwise, same shape
  Scale,        // * compile-time constant
  AddConst,     // + compile-time constant
  MatMul,       // A*B
  MatMulNT,     // A*B^T
  MatVec,       // A*x
  MatVecT,      // A^T*x
  Dot,          // <u, v> -> scalar
  Concat,       // rank-1 list -> rank-1
  StackRows,    // rank-1 list -> rank-2
  ConcatCols,   // rank-2 list -> rank-2 (same row count)
  Embed,        // table gather by row ids
  Softmax,      // rank-1
  SoftmaxRows,  // rank-2, per row
  LogSoftmax,   // rank-1
  LogSumExp,    // rank-1 -> scalar
  Pick,         // rank-1 element -> scalar
  Sigmoid,
  Tanh,
  Log,
  Exp,
  Square,
  Inv,
  SumAll,
  MeanAll,
  RowSum,         // rank-2 -> rank-1 over columns
  LayerNormRows,  // (x, gain, bias), per-row normalization
  L2Normalize,    // rank-1
  L2Norm,         // rank-1 -> scalar
  PairwiseDiff,   // s -> M with M[j][l] = s[l] - s[j]
};

class Graph;

// Handle to a node in a Graph.
struct Var {
  int id = -1;
  Graph* g = nullptr;
  bool valid() const { return id >= 0 && g != nullptr; }
};

// Eagerly evaluated computation tape. Appending order is a topological
// order, so the backward pass is a single reverse sweep that visits each
// node exactly once. Graphs are not thread-safe; use one per thread.
class Graph {
 public:
  explicit Graph(bool recording = true) : recording_(recording) {}

  bool recording() const { return recording_; }
  void reset();
  std::size_t size() const { return nodes_.size(); }

  Var leaf(Tensor value);
  // Parameter leaf; repeated calls for the same parameter return the same
  // node, so all uses share one gradient accumulation point.
  Var param(ParamTensor& p);
  // Identity on the value, but gradients stop here.
  Var detach(Var v);

  const Tensor& value(Var v) const;
  // Empty tensor if the node was not reached by backward.
  const Tensor& grad(Var v) const;
  // Gradient of a parameter leaf; zeros if unreached.
  Tensor param_grad(const ParamTensor& p) const;

  // Reverse sweep from a scalar loss. Requires recording mode.
  void backward(Var loss);

  // Calls fn(param, grad) for every parameter leaf reached by backward.
  template <typename Fn>
  void for_each_param_grad(Fn&& fn) const {
    for (const Node& n : nodes_)
      if (n.param != nullptr && !n.grad.empty()) fn(*n.param, n.grad);
  }

 private:
  struct Node {
    Op op = Op::Leaf;
    std::vector<int> in;
    Tensor val;
    Tensor grad;
    double c = 0.0;        // scale factor / added constant / cached norm
    std::vector<int> idx;  // embed row ids, pick index
    Tensor aux;            // op-specific cache (e.g. layer-norm x-hat)
    Tensor aux2;           // op-specific cache (e.g. layer-norm inv-std)
    ParamTensor* param = nullptr;
  };

  friend Var make_op(Graph& g, Op op, std::vector<int> in, Tensor val);

  int add_node(Node n);
  Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  Tensor& ensure_grad(int id);
  void backprop_node(int id);

  std::vector<Node> nodes_;
  std::unordered_map<const ParamTensor*, int> param_nodes_;
  bool recording_ = true;

  friend Var add(Var a, Var b);
  friend Var add_bias(Var m, Var b);
  friend Var add_scalar(Var t, Var s);
  friend Var sub(Var a, Var b);
  friend Var mul(Var a, Var b);
  friend Var scale(Var a, double c);
  friend Var add_const(Var a, double c);
  friend Var matmul(Var a, Var b);
  friend Var matmul_nt(Var a, Var b);
  friend Var matvec(Var a, Var x);
  friend Var matvec_t(Var a, Var x);
  friend Var dot(Var u, Var v);
  friend Var concat(const std::vector<Var>& parts);
  friend Var stack_rows(const std::vector<Var>& rows);
  friend Var concat_cols(const std::vector<Var>& blocks);
  friend Var embed(Var table, const std::vector<int>& ids);
  friend Var softmax(Var v);
  friend Var softmax_rows(Var m);
  friend Var log_softmax(Var v);
  friend Var logsumexp(Var v);
  friend Var pick(Var v, int i);
  friend Var sigmoid(Var v);
  friend Var tanh_op(Var v);
  friend Var log_op(Var v);
  friend Var exp_op(Var v);
  friend Var square(Var v);
  friend Var inv(Var v);
  friend Var sum_all(Var v);
  friend Var mean_all(Var v);
  friend Var row_sum(Var m);
  friend Var layer_norm_rows(Var x, Var gain, Var bias);
  friend Var l2_normalize(Var v);
  friend Var l2_norm(Var v);
  friend Var pairwise_diff(Var s);
};

Var add(Var a, Var b);
Var add_bias(Var m, Var b);
Var add_scalar(Var t, Var s);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double c);
Var add_const(Var a, double c);
Var matmul(Var a, Var b);
Var matmul_nt(Var a, Var b);
Var matvec(Var a, Var x);
Var matvec_t(Var a, Var x);
Var dot(Var u, Var v);
Var concat(const std::vector<Var>& parts);
Var stack_rows(const std::vector<Var>& rows);
Var concat_cols(const std::vector<Var>& blocks);
Var embed(Var table, const std::vector<int>& ids);
Var softmax(Var v);
Var softmax_rows(Var m);
Var log_softmax(Var v);
Var logsumexp(Var v);
Var pick(Var v, int i);
Var sigmoid(Var v);
Var tanh_op(Var v);
Var log_op(Var v);
Var exp_op(Var v);
Var square(Var v);
Var inv(Var v);
Var sum_all(Var v);
Var mean_all(Var v);
Var row_sum(Var m);
Var layer_norm_rows(Var x, Var gain, Var bias);
Var l2_normalize(Var v);
Var l2_norm(Var v);
Var pairwise_diff(Var s);

constexpr double kLayerNormEps = 1e-5;

}  // namespace ltr
