#pragma once

#include "proxyjoin/types.hpp"

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace proxyjoin {

// Euclidean cell matching with threshold tau. On unit vectors
// d(x, y) <= tau  <=>  x.y >= 1 - tau^2 / 2.
struct MatchConfig {
  double tau = 0.2;

  double sim_threshold_alpha() const { return 1.0 - tau * tau / 2.0; }
  void validate() const;
};

struct JoinabilityScore {
  std::size_t matched = 0;
  std::size_t query_size = 1;

  double value() const { return static_cast<double>(matched) / static_cast<double>(query_size); }
  friend bool operator==(const JoinabilityScore&, const JoinabilityScore&) = default;
};

// Boundary distance == tau counts as a match.
bool cells_match(const RowVector& a, const RowVector& b, const MatchConfig& cfg);

// Fraction of query rows with at least one candidate row within tau.
// Naive O(|query| * |candidate|) scan.
JoinabilityScore joinability(const ColumnMatrix& query, const ColumnMatrix& candidate,
                             const MatchConfig& cfg);

// Similarity form: a query row counts when its max dot product is strictly
// greater than alpha. Rows are assumed unit-norm.
JoinabilityScore joinability_sim_form(const ColumnMatrix& query, const ColumnMatrix& candidate,
                                      double alpha);

struct RankedColumn {
  std::string id;
  JoinabilityScore score;
};

// Ground-truth top-k by exact joinability: value descending, then id ascending.
std::vector<RankedColumn> exact_topk(const ColumnMatrix& query, std::span<const ColumnMatrix> columns,
                                     std::span<const std::string> ids, std::size_t k,
                                     const MatchConfig& cfg);

void write_oracle_csv_header(std::ostream& out);
void write_oracle_csv_rows(std::ostream& out, const std::string& query_id,
                           std::span<const RankedColumn> ranked);

}  // namespace proxyjoin
