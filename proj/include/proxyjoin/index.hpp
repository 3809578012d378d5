#pragma once

#include "proxyjoin/types.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace proxyjoin {

// Column embeddings persisted in 32-bit floats, addressed by column id.
class VectorStore {
 public:
  VectorStore() = default;
  explicit VectorStore(std::uint32_t dimension) : dimension_(dimension) {}

  std::uint32_t dimension() const { return dimension_; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }

  // Rejects duplicate ids and wrong lengths; the vector is downcast to float.
  void add(const std::string& id, const Vector& values);
  void add(const std::string& id, std::span<const float> values);

  const std::string& id(std::size_t i) const { return ids_[i]; }
  std::span<const float> vector(std::size_t i) const {
    return {data_.data() + i * dimension_, dimension_};
  }
  bool contains(const std::string& id) const { return index_.contains(id); }
  std::size_t position(const std::string& id) const;

  friend bool operator==(const VectorStore& a, const VectorStore& b) {
    return a.dimension_ == b.dimension_ && a.ids_ == b.ids_ && a.data_ == b.data_;
  }

 private:
  std::uint32_t dimension_ = 0;
  std::vector<std::string> ids_;
  std::vector<float> data_;
  std::unordered_map<std::string, std::size_t> index_;
};

void save_store(const VectorStore& store, const std::filesystem::path& path);
VectorStore load_store(const std::filesystem::path& path);

struct Neighbor {
  std::string id;
  double similarity = 0.0;
};

// Float products with double accumulation.
double dot(std::span<const float> a, std::span<const float> b);

// Top-min(k, |store|) by dot product, ties by id ascending.
std::vector<Neighbor> knn_exact(const VectorStore& store, std::span<const float> query, std::size_t k);
std::vector<Neighbor> knn_exact(const VectorStore& store, const Vector& query, std::size_t k);

struct AnnIndexConfig {
  int max_neighbors = 16;
  int ef_construction = 200;
  int ef_search = 100;
  std::size_t exact_fallback_threshold = 2048;
  std::uint64_t seed = 7;

  void validate() const;
};

// Hierarchical navigable small-world graph over a VectorStore. The store is
// borrowed and must outlive the index. Single writer; concurrent readers
// are fine once construction is done.
class HnswIndex {
 public:
  HnswIndex(const VectorStore& store, AnnIndexConfig cfg);

  // Inserts store entries [size(), store.size()) in order.
  void sync();

  std::size_t size() const { return levels_.size(); }
  const AnnIndexConfig& config() const { return cfg_; }
  bool uses_graph() const { return store_->size() >= cfg_.exact_fallback_threshold; }
  int max_level() const { return max_level_; }
  const std::vector<std::uint32_t>& neighbors(std::size_t node, int level) const {
    return links_[node][static_cast<std::size_t>(level)];
  }

  // Throws when ef < k. ef = 0 selects cfg.ef_search.
  std::vector<Neighbor> search(std::span<const float> query, std::size_t k, std::size_t ef = 0) const;
  std::vector<Neighbor> search(const Vector& query, std::size_t k, std::size_t ef = 0) const;

  void save(const std::filesystem::path& path) const;
  static HnswIndex load(const VectorStore& store, const std::filesystem::path& path);

 private:
  struct Candidate {
    float dist;
    std::uint32_t node;
  };

  float distance(std::span<const float> q, std::uint32_t node) const;
  void insert(std::uint32_t node);
  std::vector<Candidate> search_layer(std::span<const float> q, std::uint32_t entry, std::size_t ef,
                                      int level) const;
  std::vector<std::uint32_t> select_neighbors(std::span<const float> base, std::vector<Candidate> cands,
                                              std::size_t keep) const;
  std::size_t capacity(int level) const;
  int draw_level(std::uint32_t node) const;

  const VectorStore* store_;
  AnnIndexConfig cfg_;
  std::vector<int> levels_;
  std::vector<std::vector<std::vector<std::uint32_t>>> links_;
  int max_level_ = -1;
  std::uint32_t entry_ = 0;
};

}  // namespace proxyjoin
