#pragma once

#include <cstdint>
#include <vector>

#include "ltr/graph.hpp"
#include "ltr/rng.hpp"
#include "ltr/world.hpp"

namespace ltr::tte {

struct TTEConfig {
  int vocab_size = 512;
  int d_tok = 32;    // token embedding width
  int hidden = 64;   // tower MLP hidden width
  int d = 32;        // output embedding dimension
  int res_hidden = 32;
  int d_r = 8;       // residual feature dimension

  bool operator==(const TTEConfig&) const = default;
};

// One tower: attention pooling over token embeddings, a 2-layer MLP to the
// (L2-normalized) embedding, and a separate 2-layer MLP producing the
// unnormalized residual features.
struct Tower {
  ParamTensor w_pool;  // [d_tok]
  ParamTensor w1, b1;  // d_tok -> hidden
  ParamTensor w2, b2;  // hidden -> d
  ParamTensor rw1, rb1;  // d_tok -> res_hidden
  ParamTensor rw2, rb2;  // res_hidden -> d_r
};

struct TTEModel {
  TTEConfig cfg;
  ParamTensor token_embedding;  // [vocab_size x d_tok]
  Tower query_tower;
  Tower item_tower;

  static TTEModel init(const TTEConfig& cfg, Rng& rng);
  // Fixed enumeration order; checkpoints and Adam state rely on it.
  std::vector<ParamTensor*> params();
  std::vector<const ParamTensor*> params() const;
};

// Graph handles produced by an encoder pass.
struct Encoding {
  Var e;      // [d], unit norm
  Var r;      // [d_r]
  Var alpha;  // pooling weights over tokens
  Var pooled; // pooled token vector
};

Encoding encode_query(Graph& g, const TTEModel& m, const std::vector<int>& tokens);
Encoding encode_item(Graph& g, const TTEModel& m, const std::vector<int>& tokens);

// Evaluation path: same computation on a non-recording scratch graph.
struct EncodingValues {
  std::vector<double> e;
  std::vector<double> r;
};
EncodingValues encode_query_values(const TTEModel& m, const std::vector<int>& tokens);
EncodingValues encode_item_values(const TTEModel& m, const std::vector<int>& tokens);

// Cosine similarity; rejects zero vectors.
double similarity(const std::vector<double>& e_q, const std::vector<double>& e_i);

// Precomputed item embeddings, row-major.
struct ItemCache {
  int d = 0;
  int d_r = 0;
  std::vector<double> emb;  // n x d
  std::vector<double> res;  // n x d_r
  std::int64_t n() const { return d == 0 ? 0 : static_cast<std::int64_t>(emb.size()) / d; }
  const double* emb_row(int i) const { return emb.data() + static_cast<std::size_t>(i) * d; }
  const double* res_row(int i) const { return res.data() + static_cast<std::size_t>(i) * d_r; }
};

ItemCache build_item_cache(const TTEModel& m, const world::World& w, bool parallel);

struct SlateItem {
  int item_id = -1;
  double tte_score = 0.0;
};

// Per-query candidate list, ordered by TTE score descending (ties by
// ascending item id). lt_scores/grades are attached where known.
struct CandidateSlate {
  int query_id = -1;
  std::vector<SlateItem> items;
  std::vector<double> lt_scores;  // empty until LT scoring
  std::vector<int> grades;        // empty until labeled
  int k() const { return static_cast<int>(items.size()); }
};

// Scores every cached item against the query embedding.
std::vector<double> score_all(const std::vector<double>& query_emb, const ItemCache& cache,
                              bool parallel);

// Exactly the k best items by score (ties by ascending id).
std::vector<SlateItem> select_top_k(const std::vector<double>& scores, int k);

CandidateSlate top_k(const TTEModel& m, const ItemCache& cache, const world::World& w,
                     int query_id, int k, bool parallel = true);

}  // namespace ltr::tte
