#include "proxyjoin/index.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <set>

using namespace proxyjoin;
using testing_support::random_unit_rows;
using testing_support::TempDir;

namespace {

VectorStore random_store(std::size_t n, int dim, std::mt19937_64& rng) {
  VectorStore store(static_cast<std::uint32_t>(dim));
  const auto m = random_unit_rows(static_cast<Eigen::Index>(n), dim, rng);
  for (std::size_t i = 0; i < n; ++i) store.add("v" + std::to_string(i), Vector(m.row(static_cast<Eigen::Index>(i)).transpose()));
  return store;
}

// Full sort of every stored vector by float-rounded dot product, then id.
std::vector<std::string> brute_force(const VectorStore& store, const Vector& q, std::size_t k) {
  std::vector<float> qf(q.data(), q.data() + q.size());
  std::vector<std::pair<double, std::string>> all;
  for (std::size_t i = 0; i < store.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < qf.size(); ++j) s += static_cast<double>(qf[j]) * store.vector(i)[j];
    all.emplace_back(-s, store.id(i));
  }
  std::sort(all.begin(), all.end());
  std::vector<std::string> out;
  for (std::size_t i = 0; i < std::min(k, all.size()); ++i) out.push_back(all[i].second);
  return out;
}

std::vector<std::string> ids(const std::vector<Neighbor>& hits) {
  std::vector<std::string> out;
  for (const auto& h : hits) out.push_back(h.id);
  return out;
}

}  // namespace

TEST(VectorStore, RejectsDuplicatesAndWrongLengths) {
  VectorStore store(3);
  store.add("a", Vector::Ones(3));
  EXPECT_THROW(store.add("a", Vector::Ones(3)), Error);
  EXPECT_THROW(store.add("b", Vector::Ones(4)), Error);
  EXPECT_EQ(store.size(), 1u);
  EXPECT_EQ(store.position("a"), 0u);
  EXPECT_THROW(store.position("zz"), Error);
}

TEST(VectorStore, SaveLoadRoundTrip) {
  TempDir dir("store");
  std::mt19937_64 rng(1);
  const VectorStore store = random_store(50, 7, rng);
  save_store(store, dir.path() / "s.snpy");
  EXPECT_TRUE(load_store(dir.path() / "s.snpy") == store);
  std::ofstream(dir.path() / "bad.snpy") << "SNPXjunk";
  EXPECT_THROW(load_store(dir.path() / "bad.snpy"), Error);
  std::filesystem::resize_file(dir.path() / "s.snpy", 40);
  EXPECT_THROW(load_store(dir.path() / "s.snpy"), Error);
}

TEST(KnnExact, MatchesBruteForceOracle) {
  std::mt19937_64 rng(2);
  const VectorStore store = random_store(300, 8, rng);
  for (int q = 0; q < 20; ++q) {
    const Vector query = random_unit_rows(1, 8, rng).row(0).transpose();
    EXPECT_EQ(ids(knn_exact(store, query, 10)), brute_force(store, query, 10));
  }
}

TEST(KnnExact, TiesBreakById) {
  VectorStore store(2);
  store.add("c", Vector::Unit(2, 0));
  store.add("a", Vector::Unit(2, 0));
  store.add("b", Vector::Unit(2, 1));
  const auto hits = knn_exact(store, Vector(Vector::Unit(2, 0)), 3);
  EXPECT_EQ(ids(hits), (std::vector<std::string>{"a", "c", "b"}));
  EXPECT_EQ(knn_exact(store, Vector(Vector::Unit(2, 0)), 10).size(), 3u);
  EXPECT_THROW(knn_exact(store, Vector(Vector::Unit(2, 0)), 0), Error);
  EXPECT_THROW(knn_exact(store, Vector(Vector::Unit(3, 0)), 1), Error);
}

TEST(Hnsw, SmallStoresUseExactSearch) {
  std::mt19937_64 rng(3);
  const VectorStore store = random_store(100, 8, rng);
  HnswIndex index(store, AnnIndexConfig{});
  index.sync();
  EXPECT_FALSE(index.uses_graph());
  const Vector q = random_unit_rows(1, 8, rng).row(0).transpose();
  EXPECT_EQ(ids(index.search(q, 10)), brute_force(store, q, 10));
}

TEST(Hnsw, GraphSearchHasHighRecall) {
  std::mt19937_64 rng(4);
  const VectorStore store = random_store(4000, 16, rng);
  AnnIndexConfig cfg;
  cfg.exact_fallback_threshold = 0;
  HnswIndex index(store, cfg);
  index.sync();
  ASSERT_TRUE(index.uses_graph());
  double hit = 0.0;
  for (int q = 0; q < 50; ++q) {
    const Vector query = random_unit_rows(1, 16, rng).row(0).transpose();
    const auto truth = brute_force(store, query, 10);
    const std::set<std::string> want(truth.begin(), truth.end());
    for (const auto& h : index.search(query, 10)) hit += want.contains(h.id) ? 1.0 : 0.0;
  }
  EXPECT_GE(hit / 500.0, 0.95);
}

TEST(Hnsw, DegreesRespectLayerCapacity) {
  std::mt19937_64 rng(5);
  const VectorStore store = random_store(1500, 8, rng);
  AnnIndexConfig cfg;
  cfg.exact_fallback_threshold = 0;
  cfg.max_neighbors = 6;
  HnswIndex index(store, cfg);
  index.sync();
  for (std::size_t node = 0; node < index.size(); ++node) {
    EXPECT_LE(index.neighbors(node, 0).size(), 12u);
  }
}

TEST(Hnsw, ResultsSortedAndSizedToK) {
  std::mt19937_64 rng(6);
  const VectorStore store = random_store(3000, 8, rng);
  AnnIndexConfig cfg;
  cfg.exact_fallback_threshold = 0;
  HnswIndex index(store, cfg);
  index.sync();
  const Vector q = random_unit_rows(1, 8, rng).row(0).transpose();
  const auto hits = index.search(q, 25, 100);
  ASSERT_EQ(hits.size(), 25u);
  for (std::size_t i = 1; i < hits.size(); ++i) EXPECT_GE(hits[i - 1].similarity, hits[i].similarity);
  EXPECT_THROW(index.search(q, 30, 20), Error);
}

TEST(Hnsw, SaveLoadGivesIdenticalResults) {
  TempDir dir("hnsw");
  std::mt19937_64 rng(7);
  const VectorStore store = random_store(2500, 8, rng);
  AnnIndexConfig cfg;
  cfg.exact_fallback_threshold = 0;
  HnswIndex index(store, cfg);
  index.sync();
  index.save(dir.path() / "i.snpi");
  const HnswIndex back = HnswIndex::load(store, dir.path() / "i.snpi");
  for (int q = 0; q < 10; ++q) {
    const Vector query = random_unit_rows(1, 8, rng).row(0).transpose();
    EXPECT_EQ(ids(back.search(query, 10)), ids(index.search(query, 10)));
  }
  const VectorStore other = random_store(10, 8, rng);
  EXPECT_THROW(HnswIndex::load(other, dir.path() / "i.snpi"), Error);
}

TEST(Hnsw, SyncInsertsNewEntries) {
  std::mt19937_64 rng(8);
  VectorStore store = random_store(2100, 8, rng);
  AnnIndexConfig cfg;
  cfg.exact_fallback_threshold = 0;
  HnswIndex index(store, cfg);
  index.sync();
  const Vector extra = random_unit_rows(1, 8, rng).row(0).transpose();
  store.add("fresh", extra);
  EXPECT_THROW(index.search(extra, 1), Error);
  index.sync();
  EXPECT_EQ(index.size(), 2101u);
  EXPECT_EQ(index.search(extra, 1).front().id, "fresh");
}

TEST(Hnsw, BuildIsDeterministic) {
  std::mt19937_64 rng(9);
  const VectorStore store = random_store(2200, 8, rng);
  AnnIndexConfig cfg;
  cfg.exact_fallback_threshold = 0;
  HnswIndex a(store, cfg), b(store, cfg);
  a.sync();
  b.sync();
  EXPECT_EQ(a.max_level(), b.max_level());
  for (std::size_t n = 0; n < a.size(); n += 97) EXPECT_EQ(a.neighbors(n, 0), b.neighbors(n, 0));
}
