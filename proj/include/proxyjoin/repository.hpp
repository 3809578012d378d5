#pragma once

#include "proxyjoin/embedder.hpp"
#include "proxyjoin/matching.hpp"
#include "proxyjoin/types.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace proxyjoin {

struct Column {
  std::string id;        // "table:column"
  std::string table_id;
  std::vector<std::string> cells;  // normalized, distinct, first-seen order
};

// Column repository. Append-only; ids are unique.
class Repository {
 public:
  std::size_t size() const { return columns_.size(); }
  bool empty() const { return columns_.empty(); }
  const std::vector<Column>& columns() const { return columns_; }
  const Column& at(std::size_t i) const { return columns_[i]; }
  const Column& find(const std::string& id) const;
  bool contains(const std::string& id) const { return by_id_.contains(id); }

  // Throws on a duplicate id (including duplicates inside `added`); on error
  // the repository is left unchanged.
  void add_columns(std::vector<Column> added);

  std::vector<std::string> ids() const;

 private:
  std::vector<Column> columns_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

// Repository columns paired with their cached cell-embedding matrices.
struct EmbeddedColumns {
  std::vector<std::string> ids;
  std::vector<ColumnMatrix> matrices;

  // Embeds only columns not yet cached; earlier matrices are left untouched.
  void sync(const Repository& repo, const Embedder& embedder);
};

EmbeddedColumns embed_repository(const Repository& repo, const Embedder& embedder);

// RFC-4180 CSV: quoted fields, doubled quotes, embedded separators/newlines.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

// Cell counts as numeric if, after dropping commas and one leading sign, it
// is an integer or a plain decimal.
bool is_numeric_cell(std::string_view cell);

// Normalizes and deduplicates cells, preserving first occurrence.
std::vector<std::string> clean_cells(std::span<const std::string> raw);

// Keeps a column when it has more than 5 distinct cells and at most half of
// them are numeric.
bool keep_column(std::span<const std::string> cleaned);

std::vector<Column> columns_from_csv(std::string_view text, const std::string& table_id);

struct IngestReport {
  Repository repository;
  std::vector<std::string> file_errors;
  std::size_t files_read = 0;
  std::size_t columns_seen = 0;
};

// Reads every *.csv under `dir` in sorted path order. Unreadable files are
// reported and skipped; throws when no column survives filtering.
IngestReport ingest_tables(const std::filesystem::path& dir);

// Repository file: manifest fields (id, table, cell_count) plus the cells.
void save_repository(const Repository& repo, const std::filesystem::path& path);
Repository load_repository(const std::filesystem::path& path);
void save_columns(std::span<const Column> cols, const std::filesystem::path& path);
std::vector<Column> load_columns(const std::filesystem::path& path);

struct SynthBenchSpec {
  std::size_t n_columns = 2000;  // includes the planted columns
  std::size_t n_queries = 40;
  std::size_t cells_min = 20;
  std::size_t cells_max = 30;
  std::vector<double> levels = {1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.45, 0.4, 0.35, 0.3, 0.25, 0.2};
  std::size_t vocabulary = 20000;
  std::size_t domains = 8;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SynthBenchmark {
  Repository repository;
  std::vector<Column> queries;
};

// Random-token columns grouped into domains that share a cell suffix. For
// each query and level, one repository column contains exactly
// ceil(level * |query|) query cells; all other cells are fresh tokens.
SynthBenchmark synth_benchmark(const SynthBenchSpec& spec);

struct GroundTruth {
  std::string query_id;
  std::vector<RankedColumn> ranked;
};

// Oracle top-k per query over the repository.
std::vector<GroundTruth> compute_ground_truth(std::span<const Column> queries, const EmbeddedColumns& repo,
                                              const Embedder& embedder, std::size_t k,
                                              const MatchConfig& match);

void write_ground_truth_csv(std::ostream& out, std::span<const GroundTruth> truth);

}  // namespace proxyjoin
