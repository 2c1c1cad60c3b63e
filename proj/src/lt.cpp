#include "ltr/lt.hpp"

#include <cmath>

#include "ltr/error.hpp"

namespace ltr::lt {

namespace {

Tensor uniform_fan_in(Rng& rng, std::vector<int> shape, int fan_in) {
  Tensor t = Tensor::zeros(std::move(shape));
  const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& x : t.data) x = rng.uniform(-s, s);
  return t;
}

Tensor sinusoidal_table(int max_k, int d_model) {
  Tensor pe = Tensor::zeros({max_k, d_model});
  for (int pos = 0; pos < max_k; ++pos)
    for (int i = 0; i < d_model; i += 2) {
      const double rate = std::pow(10000.0, static_cast<double>(i) / d_model);
      pe.at(pos, i) = std::sin(pos / rate);
      if (i + 1 < d_model) pe.at(pos, i + 1) = std::cos(pos / rate);
    }
  return pe;
}

}  // namespace

LTModel LTModel::init(const LTConfig& cfg, Rng& rng) {
  if (cfg.d_model % cfg.n_heads != 0)
    throw ConfigError("lt: d_model (" + std::to_string(cfg.d_model) +
                      ") must be divisible by n_heads (" + std::to_string(cfg.n_heads) + ")");
  LTModel m;
  m.cfg = cfg;
  const int dm = cfg.d_model, dh = cfg.d_head();
  m.in_proj = {"lt.in_proj", uniform_fan_in(rng, {cfg.input_dim(), dm}, cfg.input_dim())};
  m.in_bias = {"lt.in_bias", Tensor::zeros({dm})};
  m.layers.resize(static_cast<std::size_t>(cfg.n_layers));
  for (int l = 0; l < cfg.n_layers; ++l) {
    LTLayer& layer = m.layers[static_cast<std::size_t>(l)];
    const std::string p = "lt.layer" + std::to_string(l);
    layer.heads.resize(static_cast<std::size_t>(cfg.n_heads));
    for (int h = 0; h < cfg.n_heads; ++h) {
      AttentionHead& head = layer.heads[static_cast<std::size_t>(h)];
      const std::string hp = p + ".head" + std::to_string(h);
      head.wq = {hp + ".wq", uniform_fan_in(rng, {dm, dh}, dm)};
      head.wk = {hp + ".wk", uniform_fan_in(rng, {dm, dh}, dm)};
      head.wv = {hp + ".wv", uniform_fan_in(rng, {dm, dh}, dm)};
    }
    layer.wo = {p + ".wo", uniform_fan_in(rng, {dm, dm}, dm)};
    layer.bo = {p + ".bo", Tensor::zeros({dm})};
    layer.ln1_gain = {p + ".ln1_gain", Tensor::full({dm}, 1.0)};
    layer.ln1_bias = {p + ".ln1_bias", Tensor::zeros({dm})};
    layer.ln2_gain = {p + ".ln2_gain", Tensor::full({dm}, 1.0)};
    layer.ln2_bias = {p + ".ln2_bias", Tensor::zeros({dm})};
    layer.ff1 = {p + ".ff1", uniform_fan_in(rng, {dm, cfg.d_ff}, dm)};
    layer.fb1 = {p + ".fb1", Tensor::zeros({cfg.d_ff})};
    layer.ff2 = {p + ".ff2", uniform_fan_in(rng, {cfg.d_ff, dm}, cfg.d_ff)};
    layer.fb2 = {p + ".fb2", Tensor::zeros({dm})};
  }
  m.w_score = {"lt.w_score", uniform_fan_in(rng, {dm}, dm)};
  m.b_score = {"lt.b_score", Tensor::zeros({1})};
  m.align_w = {"lt.align_w", uniform_fan_in(rng, {cfg.d, dm}, dm)};
  m.pe_table = sinusoidal_table(cfg.max_k, dm);
  return m;
}

std::vector<ParamTensor*> LTModel::params() {
  std::vector<ParamTensor*> out;
  out.push_back(&in_proj);
  out.push_back(&in_bias);
  for (LTLayer& layer : layers) {
    for (AttentionHead& h : layer.heads) {
      out.push_back(&h.wq);
      out.push_back(&h.wk);
      out.push_back(&h.wv);
    }
    out.push_back(&layer.wo);
    out.push_back(&layer.bo);
    out.push_back(&layer.ln1_gain);
    out.push_back(&layer.ln1_bias);
    out.push_back(&layer.ln2_gain);
    out.push_back(&layer.ln2_bias);
    out.push_back(&layer.ff1);
    out.push_back(&layer.fb1);
    out.push_back(&layer.ff2);
    out.push_back(&layer.fb2);
  }
  out.push_back(&w_score);
  out.push_back(&b_score);
  out.push_back(&align_w);
  return out;
}

std::vector<const ParamTensor*> LTModel::params() const {
  auto mutable_params = const_cast<LTModel*>(this)->params();
  return {mutable_params.begin(), mutable_params.end()};
}

Var assemble_inputs(Graph& g, const SlateInputs& in) {
  const std::size_t k = in.e_items.size();
  if (k == 0) throw Error("assemble_inputs: empty slate");
  if (in.r_items.size() != k || in.tte_scores.size() != k)
    throw Error("assemble_inputs: missing embeddings or scores for some candidates");
  if (!in.e_q.valid() || !in.r_q.valid())
    throw Error("assemble_inputs: missing query embedding");
  std::vector<Var> rows;
  rows.reserve(k);
  for (std::size_t j = 0; j < k; ++j)
    rows.push_back(concat({in.e_q, in.e_items[j], in.r_q, in.r_items[j], in.tte_scores[j]}));
  return stack_rows(rows);
}

LTForward lt_forward(Graph& g, const LTModel& m, Var x, bool positional_encoding) {
  const Tensor& xv = g.value(x);
  const int k = xv.rows();
  if (xv.cols() != m.cfg.input_dim())
    throw ShapeError("lt_forward: input " + shape_str(xv.shape) + " vs expected [k x " +
                     std::to_string(m.cfg.input_dim()) + "]");
  auto& mm = const_cast<LTModel&>(m);
  LTForward out;

  Var z = add_bias(matmul(x, g.param(mm.in_proj)), g.param(mm.in_bias));
  if (positional_encoding) {
    if (k > m.cfg.max_k)
      throw Error("lt_forward: slate size " + std::to_string(k) +
                  " exceeds positional table size " + std::to_string(m.cfg.max_k));
    Tensor pe = Tensor::zeros({k, m.cfg.d_model});
    for (int j = 0; j < k; ++j)
      std::copy(m.pe_table.row_ptr(j), m.pe_table.row_ptr(j) + m.cfg.d_model, pe.row_ptr(j));
    z = add(z, g.leaf(std::move(pe)));
  }

  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(m.cfg.d_head()));
  for (LTLayer& layer : mm.layers) {
    Var y = layer_norm_rows(z, g.param(layer.ln1_gain), g.param(layer.ln1_bias));
    std::vector<Var> head_outputs;
    head_outputs.reserve(layer.heads.size());
    for (AttentionHead& head : layer.heads) {
      Var q = matmul(y, g.param(head.wq));
      Var kk = matmul(y, g.param(head.wk));
      Var v = matmul(y, g.param(head.wv));
      Var attn = softmax_rows(scale(matmul_nt(q, kk), inv_sqrt_dh));
      out.attention.push_back(attn);
      head_outputs.push_back(matmul(attn, v));
    }
    Var merged = head_outputs.size() == 1 ? head_outputs[0] : concat_cols(head_outputs);
    z = add(z, add_bias(matmul(merged, g.param(layer.wo)), g.param(layer.bo)));

    Var y2 = layer_norm_rows(z, g.param(layer.ln2_gain), g.param(layer.ln2_bias));
    Var f = add_bias(matmul(tanh_op(add_bias(matmul(y2, g.param(layer.ff1)), g.param(layer.fb1))),
                            g.param(layer.ff2)),
                     g.param(layer.fb2));
    z = add(z, f);
  }

  out.z_final = z;
  out.scores = add_scalar(matvec(z, g.param(mm.w_score)), g.param(mm.b_score));
  return out;
}

std::vector<double> lt_scores_eval(const LTModel& m, const SlateValues& slate,
                                   bool positional_encoding) {
  const std::size_t k = slate.e_items.size();
  if (k == 0) throw Error("lt_scores_eval: empty slate");
  thread_local Graph scratch(false);
  scratch.reset();
  SlateInputs in;
  in.e_q = scratch.leaf(Tensor::vec({slate.e_q, slate.e_q + m.cfg.d}));
  in.r_q = scratch.leaf(Tensor::vec({slate.r_q, slate.r_q + m.cfg.d_r}));
  for (std::size_t j = 0; j < k; ++j) {
    in.e_items.push_back(scratch.leaf(Tensor::vec({slate.e_items[j], slate.e_items[j] + m.cfg.d})));
    in.r_items.push_back(
        scratch.leaf(Tensor::vec({slate.r_items[j], slate.r_items[j] + m.cfg.d_r})));
    in.tte_scores.push_back(scratch.leaf(Tensor::scalar(slate.tte_scores[j])));
  }
  Var x = assemble_inputs(scratch, in);
  LTForward fwd = lt_forward(scratch, m, x, positional_encoding);
  return scratch.value(fwd.scores).data;
}

}  // namespace ltr::lt
