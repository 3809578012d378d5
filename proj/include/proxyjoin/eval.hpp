#pragma once

#include "proxyjoin/types.hpp"

#include <chrono>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace proxyjoin {

struct RankedResult {
  std::string query_id;
  std::vector<std::pair<std::string, double>> entries;  // (column id, score)

  std::vector<std::string> ids() const;
};

// |top-k(approx) ∩ top-k(truth)| / k. Lists shorter than k contribute what
// they have.
double recall_at_k(const RankedResult& approx, const RankedResult& truth, std::size_t k);

// DCG over the approximate list divided by DCG over the truth list, with raw
// joinability gains at positions 1..k. When the ideal DCG is zero the result
// is 1 if the approximate DCG is also zero, else 0.
double ndcg_at_k(const RankedResult& approx, const RankedResult& truth,
                 const std::unordered_map<std::string, double>& joinability, std::size_t k);

// 6 * sum d_i^2 / (s (s^2 - 1)) over two rankings of the same ids. Ranges
// over [0, 2].
double spearman_shift(std::span<const std::string> a, std::span<const std::string> b);

// Column embedding by mean of cell embeddings, renormalized. Comparison
// baseline for the proxy projection.
Vector average_pooling_embedding(const ColumnMatrix& col);

struct MetricRow {
  std::string query_id;
  std::size_t k = 0;
  double recall = 0.0;
  double ndcg = 0.0;
};

void write_metrics_csv(std::ostream& out, std::span<const MetricRow> rows);
// {"k": {"recall": mean, "ndcg": mean, "queries": n}, ...}
std::string metrics_summary_json(std::span<const MetricRow> rows);

// Median wall time in milliseconds over `runs` invocations.
double median_ms(const std::function<void()>& fn, int runs);

struct TimingRow {
  std::string kind;  // "encode" or "search"
  std::size_t size = 0;
  double encode_ms = 0.0;
  double search_ms = 0.0;
};

void write_timing_csv(std::ostream& out, std::span<const TimingRow> rows);

}  // namespace proxyjoin
