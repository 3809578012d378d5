#include "proxyjoin/matching.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace proxyjoin {

namespace {

void check_dims(Eigen::Index a, Eigen::Index b) {
  if (a != b) {
    throw Error("dimension mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

double squared_distance(const double* a, const double* b, Eigen::Index d) {
  double acc = 0.0;
  for (Eigen::Index k = 0; k < d; ++k) {
    const double diff = a[k] - b[k];
    acc += diff * diff;
  }
  return acc;
}

}  // namespace

void MatchConfig::validate() const {
  if (!(tau >= 0.0) || !std::isfinite(tau)) throw Error("tau must be a finite non-negative number");
}

bool cells_match(const RowVector& a, const RowVector& b, const MatchConfig& cfg) {
  check_dims(a.size(), b.size());
  return std::sqrt(squared_distance(a.data(), b.data(), a.size())) <= cfg.tau;
}

JoinabilityScore joinability(const ColumnMatrix& query, const ColumnMatrix& candidate,
                             const MatchConfig& cfg) {
  if (query.rows() == 0 || candidate.rows() == 0) throw Error("joinability needs non-empty columns");
  check_dims(query.cols(), candidate.cols());
  const Eigen::Index d = query.cols();
  JoinabilityScore score{0, static_cast<std::size_t>(query.rows())};
  for (Eigen::Index i = 0; i < query.rows(); ++i) {
    const double* q = query.row(i).data();
    for (Eigen::Index j = 0; j < candidate.rows(); ++j) {
      if (std::sqrt(squared_distance(q, candidate.row(j).data(), d)) <= cfg.tau) {
        ++score.matched;
        break;
      }
    }
  }
  return score;
}

JoinabilityScore joinability_sim_form(const ColumnMatrix& query, const ColumnMatrix& candidate,
                                      double alpha) {
  if (query.rows() == 0 || candidate.rows() == 0) throw Error("joinability needs non-empty columns");
  check_dims(query.cols(), candidate.cols());
  JoinabilityScore score{0, static_cast<std::size_t>(query.rows())};
  for (Eigen::Index i = 0; i < query.rows(); ++i) {
    const double best = (candidate * query.row(i).transpose()).maxCoeff();
    if (best > alpha) ++score.matched;
  }
  return score;
}

std::vector<RankedColumn> exact_topk(const ColumnMatrix& query, std::span<const ColumnMatrix> columns,
                                     std::span<const std::string> ids, std::size_t k,
                                     const MatchConfig& cfg) {
  if (k == 0) throw Error("k must be positive");
  if (columns.empty()) throw Error("repository is empty");
  if (columns.size() != ids.size()) throw Error("ids and columns differ in length");

  std::vector<RankedColumn> all;
  all.reserve(columns.size());
  for (std::size_t i = 0; i < columns.size(); ++i) {
    all.push_back({ids[i], joinability(query, columns[i], cfg)});
  }
  // Cross-multiplied comparison keeps the ordering exact for equal ratios.
  auto better = [](const RankedColumn& a, const RankedColumn& b) {
    const auto lhs = a.score.matched * b.score.query_size;
    const auto rhs = b.score.matched * a.score.query_size;
    if (lhs != rhs) return lhs > rhs;
    return a.id < b.id;
  };
  const std::size_t take = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take), all.end(), better);
  all.resize(take);
  return all;
}

void write_oracle_csv_header(std::ostream& out) {
  out << "query_id,rank,column_id,matched,query_size,value\n";
}

void write_oracle_csv_rows(std::ostream& out, const std::string& query_id,
                           std::span<const RankedColumn> ranked) {
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    const auto& rc = ranked[r];
    out << query_id << ',' << (r + 1) << ',' << rc.id << ',' << rc.score.matched << ','
        << rc.score.query_size << ',' << rc.score.value() << '\n';
  }
}

}  // namespace proxyjoin
