#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ltr/tensor.hpp"

namespace ltr::world {

// Everything needed to regenerate a world deterministically. Latents and
// grades are derived from these fields, so only this struct is serialized.
struct WorldParams {
  std::uint64_t seed = 1;
  int n_items = 1000;
  int n_queries = 150;
  int vocab_size = 512;
  int latent_dim = 8;
  int grade_levels = 4;
  // Fractions of the corpus assigned grades 3, 2, 1 per query (at least one
  // item each); the remainder is grade 0.
  double frac_grade3 = 0.002;
  double frac_grade2 = 0.004;
  double frac_grade1 = 0.008;
  // Std-dev of the per-pair noise added to the latent dot product before
  // bucketing. Keeps relevance imperfectly learnable from tokens.
  double noise_scale = 0.25;
  int n_topics = 16;
  double topic_sharpness = 3.0;
  double signal_prob = 0.85;
  int item_tokens_min = 4;
  int item_tokens_max = 32;
  int query_tokens_min = 4;
  int query_tokens_max = 12;

  bool operator==(const WorldParams&) const = default;
};

struct Item {
  int id = 0;
  std::vector<int> tokens;
  std::vector<double> latent;
};

struct QuerySpec {
  int id = 0;
  std::vector<int> tokens;
  std::vector<double> latent;
};

// Synthetic corpus with an exact graded-relevance oracle. Grades are the
// per-query quantile buckets of noisy latent dot products, materialized at
// construction; re-querying always returns the same grade. Immutable after
// construction.
class World {
 public:
  static World generate(const WorldParams& params);

  const WorldParams& params() const { return params_; }
  int n_items() const { return static_cast<int>(items_.size()); }
  int n_queries() const { return static_cast<int>(queries_.size()); }
  const std::vector<Item>& items() const { return items_; }
  const std::vector<QuerySpec>& queries() const { return queries_; }

  // Graded relevance in [0, grade_levels); throws on unknown ids.
  int relevance(int query_id, int item_id) const;

  // Raw pair score (latent dot plus seeded noise) that the grades bucket.
  double pair_score(int query_id, int item_id) const;

  // Item ids sorted by grade descending, ties by ascending id.
  std::vector<int> ideal_ranking(int query_id) const;

  // Ids with grade > 0, ascending.
  const std::vector<int>& relevant_items(int query_id) const;
  // Ids with grade == 0, ascending.
  const std::vector<int>& irrelevant_items(int query_id) const;

  int max_relevant_per_query() const;

  // Counts of each grade over all (query, item) pairs.
  std::vector<std::int64_t> grade_histogram() const;

  // Used by tests that plant specific latents: recomputes grades and
  // derived indexes from the current latent vectors.
  void rebuild_relevance();

  std::vector<Item>& mutable_items() { return items_; }
  std::vector<QuerySpec>& mutable_queries() { return queries_; }

 private:
  WorldParams params_;
  std::vector<Item> items_;
  std::vector<QuerySpec> queries_;
  std::vector<std::uint8_t> grades_;  // n_queries x n_items, row-major
  std::vector<std::vector<int>> relevant_;
  std::vector<std::vector<int>> irrelevant_;

  void check_ids(int query_id, int item_id) const;
};

// Eq.-style performance gap: best achievable metric over the full corpus
// minus best achievable over the retrieved subset, plus the missed-gain
// upper bound. NDCG at the given cutoff is the metric.
struct GapResult {
  double gap = 0.0;
  double bound = 0.0;
};

GapResult performance_gap(const World& w, int query_id, const std::vector<int>& retrieved,
                          int cutoff);

// World file round-trip (seed + dimensions only; regeneration is
// deterministic).
void save_world(const WorldParams& params, const std::string& path);
WorldParams load_world_params(const std::string& path);

}  // namespace ltr::world
