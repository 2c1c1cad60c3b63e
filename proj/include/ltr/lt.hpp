#pragma once

#include <vector>

#include "ltr/graph.hpp"
#include "ltr/rng.hpp"

namespace ltr::lt {

struct LTConfig {
  int d = 32;   // item/query embedding dimension coming from the encoder
  int d_r = 8;  // residual feature dimension
  int d_model = 64;
  int n_heads = 4;
  int n_layers = 2;
  int d_ff = 128;
  int max_k = 512;  // positional-encoding table size

  int input_dim() const { return 2 * d + 2 * d_r + 1; }
  int d_head() const { return d_model / n_heads; }

  bool operator==(const LTConfig&) const = default;
};

struct AttentionHead {
  ParamTensor wq, wk, wv;  // [d_model x d_head]
};

struct LTLayer {
  std::vector<AttentionHead> heads;
  ParamTensor wo, bo;  // output projection
  ParamTensor ln1_gain, ln1_bias;
  ParamTensor ln2_gain, ln2_bias;
  ParamTensor ff1, fb1;  // d_model -> d_ff
  ParamTensor ff2, fb2;  // d_ff -> d_model
};

// Transformer encoder over a candidate slate plus the scoring head and the
// embedding-alignment map. Pre-layer-norm residual blocks.
struct LTModel {
  LTConfig cfg;
  ParamTensor in_proj, in_bias;  // input_dim -> d_model
  std::vector<LTLayer> layers;
  ParamTensor w_score, b_score;  // scoring head
  ParamTensor align_w;           // [d x d_model], maps z to the embedding space
  Tensor pe_table;               // sinusoidal, [max_k x d_model]; constant

  static LTModel init(const LTConfig& cfg, Rng& rng);
  std::vector<ParamTensor*> params();
  std::vector<const ParamTensor*> params() const;
};

// Per-candidate joint inputs for one slate, in graph form.
struct SlateInputs {
  Var e_q, r_q;
  std::vector<Var> e_items;
  std::vector<Var> r_items;
  std::vector<Var> tte_scores;  // scalar nodes
};

// Row j is [e_q; e_ij; r_q; r_ij; s_tte_j], shape [k x (2d + 2d_r + 1)].
Var assemble_inputs(Graph& g, const SlateInputs& inputs);

struct LTForward {
  Var scores;                     // [k]
  Var z_final;                    // [k x d_model]
  std::vector<Var> attention;     // per layer*head attention matrices
};

LTForward lt_forward(Graph& g, const LTModel& m, Var x, bool positional_encoding);

// Evaluation path on raw vectors (non-recording scratch graph).
struct SlateValues {
  const double* e_q = nullptr;
  const double* r_q = nullptr;
  std::vector<const double*> e_items;
  std::vector<const double*> r_items;
  std::vector<double> tte_scores;
};

std::vector<double> lt_scores_eval(const LTModel& m, const SlateValues& slate,
                                   bool positional_encoding);

}  // namespace ltr::lt
