#include "ltr/world.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "ltr/error.hpp"
#include "ltr/fsio.hpp"
#include "ltr/rng.hpp"

namespace ltr {

void write_file_atomic(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error("short write to " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw Error("cannot rename " + tmp + " to " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return s;
}

void append_line(const std::string& path, const std::string& line) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw Error("cannot append to " + path);
  out << line << '\n';
}

}  // namespace ltr

namespace ltr::world {

namespace {

constexpr std::uint64_t kTagItem = 0x11aa;
constexpr std::uint64_t kTagQuery = 0x22bb;
constexpr std::uint64_t kTagTopic = 0x33cc;
constexpr std::uint64_t kTagNoise = 0x44dd;

std::vector<double> unit_sphere(Rng& rng, int dim) {
  std::vector<double> v(static_cast<std::size_t>(dim));
  double n2 = 0.0;
  do {
    n2 = 0.0;
    for (double& x : v) {
      x = rng.normal();
      n2 += x * x;
    }
  } while (n2 == 0.0);
  const double inv = 1.0 / std::sqrt(n2);
  for (double& x : v) x *= inv;
  return v;
}

std::vector<int> draw_tokens(Rng& rng, const std::vector<double>& latent,
                             const std::vector<std::vector<double>>& topics,
                             const WorldParams& p, int min_len, int max_len) {
  const int len = min_len + static_cast<int>(rng.uniform_below(
                                static_cast<std::uint64_t>(max_len - min_len + 1)));
  const int n_topics = static_cast<int>(topics.size());
  // Topic mixture conditioned on the latent vector.
  std::vector<double> logits(static_cast<std::size_t>(n_topics));
  double mx = -1e300;
  for (int t = 0; t < n_topics; ++t) {
    double d = 0.0;
    for (std::size_t j = 0; j < latent.size(); ++j) d += latent[j] * topics[t][j];
    logits[t] = p.topic_sharpness * d;
    mx = std::max(mx, logits[t]);
  }
  double sum = 0.0;
  for (double& l : logits) {
    l = std::exp(l - mx);
    sum += l;
  }
  std::vector<double> cdf(logits.size());
  double acc = 0.0;
  for (std::size_t t = 0; t < logits.size(); ++t) {
    acc += logits[t] / sum;
    cdf[t] = acc;
  }
  const int block = p.vocab_size / n_topics;
  std::vector<int> tokens(static_cast<std::size_t>(len));
  for (int i = 0; i < len; ++i) {
    if (rng.uniform01() < p.signal_prob) {
      const double u = rng.uniform01();
      int topic = n_topics - 1;
      for (int t = 0; t < n_topics; ++t)
        if (u <= cdf[t]) {
          topic = t;
          break;
        }
      tokens[i] = topic * block + static_cast<int>(rng.uniform_below(
                                      static_cast<std::uint64_t>(block)));
    } else {
      tokens[i] =
          static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(p.vocab_size)));
    }
  }
  return tokens;
}

}  // namespace

World World::generate(const WorldParams& p) {
  if (p.n_items <= 0 || p.n_queries <= 0 || p.latent_dim <= 0)
    throw ConfigError("world: all counts must be positive");
  if (p.vocab_size < 16) throw ConfigError("world: vocab_size must be at least 16");
  if (p.n_topics <= 0 || p.vocab_size % p.n_topics != 0)
    throw ConfigError("world: vocab_size must be a positive multiple of n_topics");
  if (p.grade_levels != 4) throw ConfigError("world: only 4 grade levels are supported");

  World w;
  w.params_ = p;

  std::vector<std::vector<double>> topics(static_cast<std::size_t>(p.n_topics));
  for (int t = 0; t < p.n_topics; ++t) {
    Rng r(hash64(p.seed, kTagTopic, static_cast<std::uint64_t>(t)));
    topics[static_cast<std::size_t>(t)] = unit_sphere(r, p.latent_dim);
  }

  w.items_.resize(static_cast<std::size_t>(p.n_items));
  for (int i = 0; i < p.n_items; ++i) {
    Rng r(hash64(p.seed, kTagItem, static_cast<std::uint64_t>(i)));
    Item& it = w.items_[static_cast<std::size_t>(i)];
    it.id = i;
    it.latent = unit_sphere(r, p.latent_dim);
    it.tokens = draw_tokens(r, it.latent, topics, p, p.item_tokens_min, p.item_tokens_max);
  }

  w.queries_.resize(static_cast<std::size_t>(p.n_queries));
  for (int q = 0; q < p.n_queries; ++q) {
    Rng r(hash64(p.seed, kTagQuery, static_cast<std::uint64_t>(q)));
    QuerySpec& qs = w.queries_[static_cast<std::size_t>(q)];
    qs.id = q;
    qs.latent = unit_sphere(r, p.latent_dim);
    qs.tokens = draw_tokens(r, qs.latent, topics, p, p.query_tokens_min, p.query_tokens_max);
  }

  w.rebuild_relevance();
  return w;
}

double World::pair_score(int query_id, int item_id) const {
  check_ids(query_id, item_id);
  const auto& zq = queries_[static_cast<std::size_t>(query_id)].latent;
  const auto& zi = items_[static_cast<std::size_t>(item_id)].latent;
  double d = 0.0;
  for (std::size_t j = 0; j < zq.size(); ++j) d += zq[j] * zi[j];
  Rng noise(hash64(params_.seed, kTagNoise,
                   (static_cast<std::uint64_t>(query_id) << 32) ^
                       static_cast<std::uint64_t>(item_id)));
  return d + params_.noise_scale * noise.normal();
}

void World::rebuild_relevance() {
  const int n = n_items();
  const int nq = n_queries();
  grades_.assign(static_cast<std::size_t>(n) * nq, 0);
  relevant_.assign(static_cast<std::size_t>(nq), {});
  irrelevant_.assign(static_cast<std::size_t>(nq), {});

  const int c3 = std::max(1, static_cast<int>(std::lround(params_.frac_grade3 * n)));
  const int c2 = std::max(1, static_cast<int>(std::lround(params_.frac_grade2 * n)));
  const int c1 = std::max(1, static_cast<int>(std::lround(params_.frac_grade1 * n)));
  if (c3 + c2 + c1 >= n) throw ConfigError("world: grade fractions exhaust the corpus");

  std::vector<std::pair<double, int>> scored(static_cast<std::size_t>(n));
  for (int q = 0; q < nq; ++q) {
    for (int i = 0; i < n; ++i) scored[static_cast<std::size_t>(i)] = {pair_score(q, i), i};
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    std::uint8_t* row = grades_.data() + static_cast<std::size_t>(q) * n;
    for (int r = 0; r < n; ++r) {
      const int item = scored[static_cast<std::size_t>(r)].second;
      std::uint8_t g = 0;
      if (r < c3)
        g = 3;
      else if (r < c3 + c2)
        g = 2;
      else if (r < c3 + c2 + c1)
        g = 1;
      row[item] = g;
    }
    auto& rel = relevant_[static_cast<std::size_t>(q)];
    auto& irr = irrelevant_[static_cast<std::size_t>(q)];
    for (int i = 0; i < n; ++i) (row[i] > 0 ? rel : irr).push_back(i);
  }
}

void World::check_ids(int query_id, int item_id) const {
  if (query_id < 0 || query_id >= n_queries())
    throw Error("world: unknown query id " + std::to_string(query_id));
  if (item_id < 0 || item_id >= n_items())
    throw Error("world: unknown item id " + std::to_string(item_id));
}

int World::relevance(int query_id, int item_id) const {
  check_ids(query_id, item_id);
  return grades_[static_cast<std::size_t>(query_id) * n_items() + item_id];
}

std::vector<int> World::ideal_ranking(int query_id) const {
  check_ids(query_id, 0);
  std::vector<int> ids(static_cast<std::size_t>(n_items()));
  std::iota(ids.begin(), ids.end(), 0);
  const std::uint8_t* row = grades_.data() + static_cast<std::size_t>(query_id) * n_items();
  std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) {
    if (row[a] != row[b]) return row[a] > row[b];
    return a < b;
  });
  return ids;
}

const std::vector<int>& World::relevant_items(int query_id) const {
  check_ids(query_id, 0);
  return relevant_[static_cast<std::size_t>(query_id)];
}

const std::vector<int>& World::irrelevant_items(int query_id) const {
  check_ids(query_id, 0);
  return irrelevant_[static_cast<std::size_t>(query_id)];
}

int World::max_relevant_per_query() const {
  std::size_t mx = 0;
  for (const auto& r : relevant_) mx = std::max(mx, r.size());
  return static_cast<int>(mx);
}

std::vector<std::int64_t> World::grade_histogram() const {
  std::vector<std::int64_t> h(static_cast<std::size_t>(params_.grade_levels), 0);
  for (std::uint8_t g : grades_) h[g] += 1;
  return h;
}

namespace {

double discount(int position_1based) { return 1.0 / std::log2(position_1based + 1.0); }

double gain(int grade) { return std::pow(2.0, grade) - 1.0; }

}  // namespace

GapResult performance_gap(const World& w, int query_id, const std::vector<int>& retrieved,
                          int cutoff) {
  std::vector<int> ideal = w.ideal_ranking(query_id);
  double idcg = 0.0;
  for (int j = 0; j < cutoff && j < static_cast<int>(ideal.size()); ++j)
    idcg += gain(w.relevance(query_id, ideal[static_cast<std::size_t>(j)])) * discount(j + 1);

  GapResult res;
  if (idcg == 0.0) return res;  // no relevant items: gap vacuously zero

  // Best achievable DCG over the retrieved subset: its own ideal order.
  std::vector<int> subset = retrieved;
  std::sort(subset.begin(), subset.end(), [&](int a, int b) {
    int ga = w.relevance(query_id, a), gb = w.relevance(query_id, b);
    if (ga != gb) return ga > gb;
    return a < b;
  });
  double dcg_subset = 0.0;
  for (int j = 0; j < cutoff && j < static_cast<int>(subset.size()); ++j)
    dcg_subset += gain(w.relevance(query_id, subset[static_cast<std::size_t>(j)])) * discount(j + 1);

  res.gap = 1.0 - dcg_subset / idcg;

  // Missed-gain bound: each missing relevant item contributes its gain at
  // its position in the corpus-ideal ranking.
  std::vector<char> in_set(static_cast<std::size_t>(w.n_items()), 0);
  for (int id : retrieved) in_set[static_cast<std::size_t>(id)] = 1;
  double bound = 0.0;
  for (int j = 0; j < cutoff && j < static_cast<int>(ideal.size()); ++j) {
    const int id = ideal[static_cast<std::size_t>(j)];
    if (!in_set[static_cast<std::size_t>(id)] && w.relevance(query_id, id) > 0)
      bound += gain(w.relevance(query_id, id)) * discount(j + 1);
  }
  res.bound = bound / idcg;
  return res;
}

void save_world(const WorldParams& p, const std::string& path) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["kind"] = "world";
  j["seed"] = p.seed;
  j["n_items"] = p.n_items;
  j["n_queries"] = p.n_queries;
  j["vocab_size"] = p.vocab_size;
  j["latent_dim"] = p.latent_dim;
  j["grade_levels"] = p.grade_levels;
  j["frac_grade3"] = p.frac_grade3;
  j["frac_grade2"] = p.frac_grade2;
  j["frac_grade1"] = p.frac_grade1;
  j["noise_scale"] = p.noise_scale;
  j["n_topics"] = p.n_topics;
  j["topic_sharpness"] = p.topic_sharpness;
  j["signal_prob"] = p.signal_prob;
  j["item_tokens_min"] = p.item_tokens_min;
  j["item_tokens_max"] = p.item_tokens_max;
  j["query_tokens_min"] = p.query_tokens_min;
  j["query_tokens_max"] = p.query_tokens_max;
  write_file_atomic(path, j.dump(2) + "\n");
}

WorldParams load_world_params(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("world file " + path + ": " + e.what());
  }
  if (!j.contains("format_version") || j["format_version"] != 1)
    throw ConfigError("world file " + path + ": unsupported format_version");
  WorldParams p;
  p.seed = j.at("seed").get<std::uint64_t>();
  p.n_items = j.at("n_items").get<int>();
  p.n_queries = j.at("n_queries").get<int>();
  p.vocab_size = j.at("vocab_size").get<int>();
  p.latent_dim = j.at("latent_dim").get<int>();
  p.grade_levels = j.at("grade_levels").get<int>();
  p.frac_grade3 = j.at("frac_grade3").get<double>();
  p.frac_grade2 = j.at("frac_grade2").get<double>();
  p.frac_grade1 = j.at("frac_grade1").get<double>();
  p.noise_scale = j.at("noise_scale").get<double>();
  p.n_topics = j.at("n_topics").get<int>();
  p.topic_sharpness = j.at("topic_sharpness").get<double>();
  p.signal_prob = j.at("signal_prob").get<double>();
  p.item_tokens_min = j.at("item_tokens_min").get<int>();
  p.item_tokens_max = j.at("item_tokens_max").get<int>();
  p.query_tokens_min = j.at("query_tokens_min").get<int>();
  p.query_tokens_max = j.at("query_tokens_max").get<int>();
  return p;
}

}  // namespace ltr::world
