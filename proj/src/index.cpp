#include "proxyjoin/index.hpp"

#include "binary_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>

namespace proxyjoin {

namespace {

bool better(const Neighbor& a, const Neighbor& b) {
  if (a.similarity != b.similarity) return a.similarity > b.similarity;
  return a.id < b.id;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Generation-tagged visited marks, one table per thread, so concurrent
// searches never share state and no per-query clear is needed.
struct VisitedTable {
  std::vector<std::uint32_t> marks;
  std::uint32_t generation = 0;

  void reset(std::size_t n) {
    if (marks.size() < n) marks.resize(n, 0);
    if (++generation == 0) {
      std::fill(marks.begin(), marks.end(), 0);
      generation = 1;
    }
  }
  bool test_and_set(std::uint32_t i) {
    if (marks[i] == generation) return true;
    marks[i] = generation;
    return false;
  }
};

thread_local VisitedTable tls_visited;

}  // namespace

void VectorStore::add(const std::string& id, const Vector& values) {
  std::vector<float> f(static_cast<std::size_t>(values.size()));
  for (Eigen::Index i = 0; i < values.size(); ++i) f[static_cast<std::size_t>(i)] = static_cast<float>(values(i));
  add(id, std::span<const float>(f));
}

void VectorStore::add(const std::string& id, std::span<const float> values) {
  if (dimension_ == 0) dimension_ = static_cast<std::uint32_t>(values.size());
  if (values.size() != dimension_) {
    throw Error("dimension mismatch: store has " + std::to_string(dimension_) + ", got " +
                std::to_string(values.size()));
  }
  if (index_.contains(id)) throw Error("duplicate column id: " + id);
  index_.emplace(id, ids_.size());
  ids_.push_back(id);
  data_.insert(data_.end(), values.begin(), values.end());
}

std::size_t VectorStore::position(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw Error("unknown column id: " + id);
  return it->second;
}

void save_store(const VectorStore& store, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write vector store: " + path.string());
  binio::put_magic(out, "SNPY");
  binio::put_u32(out, 1);
  binio::put_u32(out, store.dimension());
  binio::put_u64(out, store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    const std::string& id = store.id(i);
    binio::put_u32(out, static_cast<std::uint32_t>(id.size()));
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
    for (float v : store.vector(i)) binio::put_f32(out, v);
  }
  if (!out) throw IoError("write failure: " + path.string());
}

VectorStore load_store(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read vector store: " + path.string());
  binio::expect_magic(in, "SNPY");
  binio::expect_version(in, 1);
  const auto dim = binio::get_u32(in);
  const auto count = binio::get_u64(in);
  VectorStore store(dim);
  std::vector<float> buf(dim);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = binio::get_u32(in);
    if (len > (1U << 20)) throw Error("implausible id length in vector store");
    std::string id(len, '\0');
    if (!in.read(id.data(), len)) throw IoError("truncated file");
    for (auto& v : buf) v = binio::get_f32(in);
    store.add(id, std::span<const float>(buf));
  }
  return store;
}

double dot(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return acc;
}

std::vector<Neighbor> knn_exact(const VectorStore& store, std::span<const float> query, std::size_t k) {
  if (store.empty()) throw Error("vector store is empty");
  if (k == 0) throw Error("k must be positive");
  if (query.size() != store.dimension()) throw Error("query dimension mismatch");
  std::vector<Neighbor> all;
  all.reserve(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) all.push_back({store.id(i), dot(query, store.vector(i))});
  const std::size_t take = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take), all.end(), better);
  all.resize(take);
  return all;
}

std::vector<Neighbor> knn_exact(const VectorStore& store, const Vector& query, std::size_t k) {
  std::vector<float> q(query.data(), query.data() + query.size());
  return knn_exact(store, std::span<const float>(q), k);
}

void AnnIndexConfig::validate() const {
  if (max_neighbors < 2) throw Error("max_neighbors must be >= 2");
  if (ef_construction < 1 || ef_search < 1) throw Error("ef parameters must be positive");
}

HnswIndex::HnswIndex(const VectorStore& store, AnnIndexConfig cfg) : store_(&store), cfg_(cfg) {
  cfg_.validate();
  sync();
}

std::size_t HnswIndex::capacity(int level) const {
  return static_cast<std::size_t>(level == 0 ? 2 * cfg_.max_neighbors : cfg_.max_neighbors);
}

int HnswIndex::draw_level(std::uint32_t node) const {
  const std::uint64_t bits = splitmix64(cfg_.seed ^ splitmix64(node));
  const double u = (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
  const double ml = 1.0 / std::log(static_cast<double>(cfg_.max_neighbors));
  return static_cast<int>(std::floor(-std::log(u) * ml));
}

float HnswIndex::distance(std::span<const float> q, std::uint32_t node) const {
  return static_cast<float>(1.0 - dot(q, store_->vector(node)));
}

std::vector<HnswIndex::Candidate> HnswIndex::search_layer(std::span<const float> q, std::uint32_t entry,
                                                          std::size_t ef, int level) const {
  auto closer = [](const Candidate& a, const Candidate& b) {
    return a.dist != b.dist ? a.dist < b.dist : a.node < b.node;
  };
  auto farther = [&](const Candidate& a, const Candidate& b) { return closer(b, a); };
  // Frontier: nearest on top. Results: farthest on top.
  std::priority_queue<Candidate, std::vector<Candidate>, decltype(farther)> frontier(farther);
  std::priority_queue<Candidate, std::vector<Candidate>, decltype(closer)> results(closer);

  VisitedTable& visited = tls_visited;
  visited.reset(levels_.size());
  const Candidate start{distance(q, entry), entry};
  visited.test_and_set(entry);
  frontier.push(start);
  results.push(start);

  while (!frontier.empty()) {
    const Candidate cur = frontier.top();
    if (cur.dist > results.top().dist && results.size() >= ef) break;
    frontier.pop();
    for (std::uint32_t nb : links_[cur.node][static_cast<std::size_t>(level)]) {
      if (visited.test_and_set(nb)) continue;
      const Candidate c{distance(q, nb), nb};
      if (results.size() < ef || closer(c, results.top())) {
        frontier.push(c);
        results.push(c);
        if (results.size() > ef) results.pop();
      }
    }
  }
  std::vector<Candidate> out;
  out.reserve(results.size());
  while (!results.empty()) {
    out.push_back(results.top());
    results.pop();
  }
  std::reverse(out.begin(), out.end());
  return out;
}

std::vector<std::uint32_t> HnswIndex::select_neighbors(std::span<const float> /*base*/,
                                                       std::vector<Candidate> cands,
                                                       std::size_t keep) const {
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    return a.dist != b.dist ? a.dist < b.dist : a.node < b.node;
  });
  // Keep a candidate only if it is closer to the base than to every neighbor
  // already kept; this spreads links across directions.
  std::vector<std::uint32_t> kept;
  for (const auto& c : cands) {
    if (kept.size() >= keep) break;
    bool diverse = true;
    for (std::uint32_t r : kept) {
      if (distance(store_->vector(c.node), r) < c.dist) {
        diverse = false;
        break;
      }
    }
    if (diverse) kept.push_back(c.node);
  }
  return kept;
}

void HnswIndex::insert(std::uint32_t node) {
  const int level = draw_level(node);
  levels_.push_back(level);
  links_.emplace_back(static_cast<std::size_t>(level) + 1);
  if (max_level_ < 0) {
    max_level_ = level;
    entry_ = node;
    return;
  }
  const auto q = store_->vector(node);
  std::uint32_t ep = entry_;
  for (int lc = max_level_; lc > level; --lc) ep = search_layer(q, ep, 1, lc).front().node;

  for (int lc = std::min(level, max_level_); lc >= 0; --lc) {
    auto cands = search_layer(q, ep, static_cast<std::size_t>(cfg_.ef_construction), lc);
    ep = cands.front().node;
    auto chosen = select_neighbors(q, cands, static_cast<std::size_t>(cfg_.max_neighbors));
    links_[node][static_cast<std::size_t>(lc)] = chosen;
    for (std::uint32_t nb : chosen) {
      auto& back = links_[nb][static_cast<std::size_t>(lc)];
      back.push_back(node);
      if (back.size() > capacity(lc)) {
        const auto base = store_->vector(nb);
        std::vector<Candidate> pool;
        pool.reserve(back.size());
        for (std::uint32_t x : back) pool.push_back({distance(base, x), x});
        back = select_neighbors(base, std::move(pool), capacity(lc));
      }
    }
  }
  if (level > max_level_) {
    max_level_ = level;
    entry_ = node;
  }
}

void HnswIndex::sync() {
  if (store_->size() > 0xFFFFFFFFULL) throw Error("store too large for 32-bit node ids");
  for (std::size_t i = levels_.size(); i < store_->size(); ++i) insert(static_cast<std::uint32_t>(i));
}

std::vector<Neighbor> HnswIndex::search(std::span<const float> query, std::size_t k, std::size_t ef) const {
  if (ef == 0) ef = static_cast<std::size_t>(cfg_.ef_search);
  if (k == 0) throw Error("k must be positive");
  if (ef < k) throw Error("ef (" + std::to_string(ef) + ") must be >= k (" + std::to_string(k) + ")");
  if (store_->empty()) throw Error("vector store is empty");
  if (query.size() != store_->dimension()) throw Error("query dimension mismatch");
  if (levels_.size() != store_->size()) throw Error("index is out of date with its store; call sync()");
  if (!uses_graph()) return knn_exact(*store_, query, k);

  std::uint32_t ep = entry_;
  for (int lc = max_level_; lc > 0; --lc) ep = search_layer(query, ep, 1, lc).front().node;
  const auto found = search_layer(query, ep, ef, 0);
  std::vector<Neighbor> out;
  out.reserve(found.size());
  for (const auto& c : found) out.push_back({store_->id(c.node), dot(query, store_->vector(c.node))});
  std::sort(out.begin(), out.end(), better);
  if (out.size() > k) out.resize(k);
  return out;
}

std::vector<Neighbor> HnswIndex::search(const Vector& query, std::size_t k, std::size_t ef) const {
  std::vector<float> q(query.data(), query.data() + query.size());
  return search(std::span<const float>(q), k, ef);
}

void HnswIndex::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write index: " + path.string());
  binio::put_magic(out, "SNPI");
  binio::put_u32(out, 1);
  binio::put_u32(out, static_cast<std::uint32_t>(cfg_.max_neighbors));
  binio::put_u32(out, static_cast<std::uint32_t>(cfg_.ef_construction));
  binio::put_u32(out, static_cast<std::uint32_t>(cfg_.ef_search));
  binio::put_u64(out, cfg_.exact_fallback_threshold);
  binio::put_u64(out, cfg_.seed);
  binio::put_u64(out, levels_.size());
  binio::put_u32(out, static_cast<std::uint32_t>(max_level_ + 1));
  binio::put_u32(out, entry_);
  for (std::size_t n = 0; n < levels_.size(); ++n) {
    binio::put_u32(out, static_cast<std::uint32_t>(levels_[n]));
    for (const auto& layer : links_[n]) {
      binio::put_u32(out, static_cast<std::uint32_t>(layer.size()));
      for (std::uint32_t nb : layer) binio::put_u32(out, nb);
    }
  }
  if (!out) throw IoError("write failure: " + path.string());
}

HnswIndex HnswIndex::load(const VectorStore& store, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read index: " + path.string());
  binio::expect_magic(in, "SNPI");
  binio::expect_version(in, 1);
  AnnIndexConfig cfg;
  cfg.max_neighbors = static_cast<int>(binio::get_u32(in));
  cfg.ef_construction = static_cast<int>(binio::get_u32(in));
  cfg.ef_search = static_cast<int>(binio::get_u32(in));
  cfg.exact_fallback_threshold = binio::get_u64(in);
  cfg.seed = binio::get_u64(in);
  const auto count = binio::get_u64(in);
  if (count != store.size()) throw Error("index was built for a store of a different size");

  VectorStore empty;
  HnswIndex idx(empty, cfg);
  idx.store_ = &store;
  idx.max_level_ = static_cast<int>(binio::get_u32(in)) - 1;
  idx.entry_ = binio::get_u32(in);
  idx.levels_.resize(count);
  idx.links_.resize(count);
  for (std::size_t n = 0; n < count; ++n) {
    const auto level = binio::get_u32(in);
    if (level > 64) throw Error("corrupt index: level out of range");
    idx.levels_[n] = static_cast<int>(level);
    idx.links_[n].resize(level + 1);
    for (auto& layer : idx.links_[n]) {
      const auto deg = binio::get_u32(in);
      if (deg > 4096) throw Error("corrupt index: degree out of range");
      layer.resize(deg);
      for (auto& nb : layer) {
        nb = binio::get_u32(in);
        if (nb >= count) throw Error("corrupt index: neighbor out of range");
      }
    }
  }
  return idx;
}

}  // namespace proxyjoin
