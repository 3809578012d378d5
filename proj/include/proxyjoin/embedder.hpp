#pragma once

#include "proxyjoin/types.hpp"

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace proxyjoin {

enum class EmbedderKind { kHashedNgram, kWordVectorFile };

struct EmbedderConfig {
  EmbedderKind kind = EmbedderKind::kHashedNgram;
  int dimension = 64;
  int ngram_min = 2;
  int ngram_max = 3;
  std::filesystem::path vector_file_path;
  std::uint64_t seed = 0x5eed;

  void validate() const;
};

// Token -> vector table read from a fastText-style .vec text file.
class WordVectorTable {
 public:
  int dimension() const { return dimension_; }
  std::size_t size() const { return vectors_.size(); }
  const RowVector* find(std::string_view token) const;

  friend WordVectorTable load_word_vectors(const std::filesystem::path& path);

 private:
  int dimension_ = 0;
  std::unordered_map<std::string, RowVector> vectors_;
};

// Accepts "token v1 .. vd" lines with an optional leading "count dim" header.
WordVectorTable load_word_vectors(const std::filesystem::path& path);

// Trims and collapses internal whitespace runs to one space.
std::string normalize_cell(std::string_view text);

// Cell embedding function h(.). Immutable after construction, so one instance
// can be shared by many threads.
class Embedder {
 public:
  explicit Embedder(EmbedderConfig cfg);

  const EmbedderConfig& config() const { return cfg_; }
  int dimension() const { return cfg_.dimension; }

  // Unit-norm embedding of one cell. Throws Error("empty cell") when the
  // normalized text is empty.
  RowVector embed_cell(std::string_view text) const;

  // Row i is embed_cell(cells[i]).
  ColumnMatrix embed_column(std::span<const std::string> cells) const;

 private:
  RowVector hashed(std::string_view text) const;

  EmbedderConfig cfg_;
  std::shared_ptr<const WordVectorTable> table_;
};

RowVector embed_cell(std::string_view text, const EmbedderConfig& cfg);

}  // namespace proxyjoin
