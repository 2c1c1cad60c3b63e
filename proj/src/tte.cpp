#include "ltr/tte.hpp"

#include <algorithm>
#include <cmath>

#include "ltr/error.hpp"
#include "ltr/kernels.hpp"

namespace ltr::tte {

namespace {

Tensor uniform_fan_in(Rng& rng, std::vector<int> shape, int fan_in) {
  Tensor t = Tensor::zeros(std::move(shape));
  const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& x : t.data) x = rng.uniform(-s, s);
  return t;
}

Tower init_tower(const TTEConfig& c, Rng& rng, const std::string& prefix) {
  Tower t;
  t.w_pool = {prefix + ".w_pool", uniform_fan_in(rng, {c.d_tok}, c.d_tok)};
  t.w1 = {prefix + ".w1", uniform_fan_in(rng, {c.d_tok, c.hidden}, c.d_tok)};
  t.b1 = {prefix + ".b1", Tensor::zeros({c.hidden})};
  t.w2 = {prefix + ".w2", uniform_fan_in(rng, {c.hidden, c.d}, c.hidden)};
  t.b2 = {prefix + ".b2", Tensor::zeros({c.d})};
  t.rw1 = {prefix + ".rw1", uniform_fan_in(rng, {c.d_tok, c.res_hidden}, c.d_tok)};
  t.rb1 = {prefix + ".rb1", Tensor::zeros({c.res_hidden})};
  t.rw2 = {prefix + ".rw2", uniform_fan_in(rng, {c.res_hidden, c.d_r}, c.res_hidden)};
  t.rb2 = {prefix + ".rb2", Tensor::zeros({c.d_r})};
  return t;
}

void tower_params(Tower& t, std::vector<ParamTensor*>& out) {
  out.push_back(&t.w_pool);
  out.push_back(&t.w1);
  out.push_back(&t.b1);
  out.push_back(&t.w2);
  out.push_back(&t.b2);
  out.push_back(&t.rw1);
  out.push_back(&t.rb1);
  out.push_back(&t.rw2);
  out.push_back(&t.rb2);
}

Encoding encode(Graph& g, const TTEModel& m, const Tower& tower, const std::vector<int>& tokens) {
  if (tokens.empty()) throw Error("encode: empty token sequence");
  // Parameter leaves; const_cast is confined to graph binding, the forward
  // pass never mutates parameter values.
  auto& mm = const_cast<TTEModel&>(m);
  auto& tw = const_cast<Tower&>(tower);
  Var table = g.param(mm.token_embedding);
  Var h = embed(table, tokens);                      // [m x d_tok]
  Var scores = matvec(h, g.param(tw.w_pool));        // [m]
  Var alpha = softmax(scores);
  Var pooled = matvec_t(h, alpha);                   // [d_tok]

  Var h1 = tanh_op(add(matvec_t(g.param(tw.w1), pooled), g.param(tw.b1)));
  Var e_raw = add(matvec_t(g.param(tw.w2), h1), g.param(tw.b2));
  Var e = l2_normalize(e_raw);

  Var r1 = tanh_op(add(matvec_t(g.param(tw.rw1), pooled), g.param(tw.rb1)));
  Var r = add(matvec_t(g.param(tw.rw2), r1), g.param(tw.rb2));
  return {e, r, alpha, pooled};
}

EncodingValues encode_values(const TTEModel& m, const Tower& tower,
                             const std::vector<int>& tokens) {
  thread_local Graph scratch(false);
  scratch.reset();
  Encoding enc = encode(scratch, m, tower, tokens);
  EncodingValues v;
  v.e = scratch.value(enc.e).data;
  v.r = scratch.value(enc.r).data;
  return v;
}

}  // namespace

TTEModel TTEModel::init(const TTEConfig& cfg, Rng& rng) {
  TTEModel m;
  m.cfg = cfg;
  m.token_embedding = {"tte.token_embedding",
                       uniform_fan_in(rng, {cfg.vocab_size, cfg.d_tok}, cfg.d_tok)};
  m.query_tower = init_tower(cfg, rng, "tte.q");
  m.item_tower = init_tower(cfg, rng, "tte.i");
  return m;
}

std::vector<ParamTensor*> TTEModel::params() {
  std::vector<ParamTensor*> out;
  out.push_back(&token_embedding);
  tower_params(query_tower, out);
  tower_params(item_tower, out);
  return out;
}

std::vector<const ParamTensor*> TTEModel::params() const {
  auto mutable_params = const_cast<TTEModel*>(this)->params();
  return {mutable_params.begin(), mutable_params.end()};
}

Encoding encode_query(Graph& g, const TTEModel& m, const std::vector<int>& tokens) {
  return encode(g, m, m.query_tower, tokens);
}

Encoding encode_item(Graph& g, const TTEModel& m, const std::vector<int>& tokens) {
  return encode(g, m, m.item_tower, tokens);
}

EncodingValues encode_query_values(const TTEModel& m, const std::vector<int>& tokens) {
  return encode_values(m, m.query_tower, tokens);
}

EncodingValues encode_item_values(const TTEModel& m, const std::vector<int>& tokens) {
  return encode_values(m, m.item_tower, tokens);
}

double similarity(const std::vector<double>& e_q, const std::vector<double>& e_i) {
  if (e_q.size() != e_i.size())
    throw ShapeError("similarity: dimension mismatch [" + std::to_string(e_q.size()) + "] vs [" +
                     std::to_string(e_i.size()) + "]");
  const int n = static_cast<int>(e_q.size());
  const double nq = kern::dot(e_q.data(), e_q.data(), n);
  const double ni = kern::dot(e_i.data(), e_i.data(), n);
  if (nq == 0.0 || ni == 0.0) throw Error("similarity: zero vector");
  return kern::dot(e_q.data(), e_i.data(), n) / (std::sqrt(nq) * std::sqrt(ni));
}

ItemCache build_item_cache(const TTEModel& m, const world::World& w, bool parallel) {
  ItemCache cache;
  cache.d = m.cfg.d;
  cache.d_r = m.cfg.d_r;
  const int n = w.n_items();
  cache.emb.assign(static_cast<std::size_t>(n) * cache.d, 0.0);
  cache.res.assign(static_cast<std::size_t>(n) * cache.d_r, 0.0);

  auto encode_one = [&](int i) {
    EncodingValues v = encode_item_values(m, w.items()[static_cast<std::size_t>(i)].tokens);
    std::copy(v.e.begin(), v.e.end(), cache.emb.begin() + static_cast<std::size_t>(i) * cache.d);
    std::copy(v.r.begin(), v.r.end(), cache.res.begin() + static_cast<std::size_t>(i) * cache.d_r);
  };

  if (parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) encode_one(i);
#else
    for (int i = 0; i < n; ++i) encode_one(i);
#endif
  } else {
    for (int i = 0; i < n; ++i) encode_one(i);
  }
  return cache;
}

std::vector<double> score_all(const std::vector<double>& query_emb, const ItemCache& cache,
                              bool parallel) {
  if (static_cast<int>(query_emb.size()) != cache.d)
    throw ShapeError("score_all: query dimension [" + std::to_string(query_emb.size()) +
                     "] vs cache [" + std::to_string(cache.d) + "]");
  std::vector<double> out(static_cast<std::size_t>(cache.n()));
  kern::score_items(cache.emb.data(), cache.n(), cache.d, query_emb.data(), out.data(), parallel);
  return out;
}

std::vector<SlateItem> select_top_k(const std::vector<double>& scores, int k) {
  const int n = static_cast<int>(scores.size());
  if (k < 1 || k > n)
    throw Error("top_k: k=" + std::to_string(k) + " out of range for corpus size " +
                std::to_string(n));
  std::vector<int> ids(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) ids[static_cast<std::size_t>(i)] = i;
  auto better = [&](int a, int b) {
    if (scores[static_cast<std::size_t>(a)] != scores[static_cast<std::size_t>(b)])
      return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
    return a < b;
  };
  std::partial_sort(ids.begin(), ids.begin() + k, ids.end(), better);
  std::vector<SlateItem> out(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j)
    out[static_cast<std::size_t>(j)] = {ids[static_cast<std::size_t>(j)],
                                        scores[static_cast<std::size_t>(ids[j])]};
  return out;
}

CandidateSlate top_k(const TTEModel& m, const ItemCache& cache, const world::World& w,
                     int query_id, int k, bool parallel) {
  EncodingValues q = encode_query_values(m, w.queries()[static_cast<std::size_t>(query_id)].tokens);
  CandidateSlate slate;
  slate.query_id = query_id;
  slate.items = select_top_k(score_all(q.e, cache, parallel), k);
  return slate;
}

}  // namespace ltr::tte
