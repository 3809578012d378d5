#include "proxyjoin/eval.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <unordered_set>

namespace proxyjoin {

namespace {

double dcg(const std::vector<std::string>& ids, const std::unordered_map<std::string, double>& gains,
           std::size_t k) {
  double total = 0.0;
  for (std::size_t i = 0; i < std::min(k, ids.size()); ++i) {
    auto it = gains.find(ids[i]);
    if (it == gains.end()) throw Error("missing joinability for column " + ids[i]);
    total += it->second / std::log2(static_cast<double>(i) + 2.0);
  }
  return total;
}

}  // namespace

std::vector<std::string> RankedResult::ids() const {
  std::vector<std::string> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.first);
  return out;
}

double recall_at_k(const RankedResult& approx, const RankedResult& truth, std::size_t k) {
  if (k == 0) throw Error("k must be positive");
  std::unordered_set<std::string> want;
  for (std::size_t i = 0; i < std::min(k, truth.entries.size()); ++i) want.insert(truth.entries[i].first);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < std::min(k, approx.entries.size()); ++i) {
    if (want.contains(approx.entries[i].first)) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(k);
}

double ndcg_at_k(const RankedResult& approx, const RankedResult& truth,
                 const std::unordered_map<std::string, double>& joinability, std::size_t k) {
  if (k == 0) throw Error("k must be positive");
  const double actual = dcg(approx.ids(), joinability, k);
  const double ideal = dcg(truth.ids(), joinability, k);
  if (ideal == 0.0) return actual == 0.0 ? 1.0 : 0.0;
  return actual / ideal;
}

double spearman_shift(std::span<const std::string> a, std::span<const std::string> b) {
  const std::size_t s = a.size();
  if (s < 2) throw Error("spearman shift needs at least two ranked items");
  if (b.size() != s) throw Error("rankings differ in length");
  std::unordered_map<std::string, std::size_t> rank_b;
  for (std::size_t i = 0; i < s; ++i) {
    if (!rank_b.emplace(b[i], i).second) throw Error("duplicate id in ranking: " + b[i]);
  }
  double sum = 0.0;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < s; ++i) {
    if (!seen.insert(a[i]).second) throw Error("duplicate id in ranking: " + a[i]);
    auto it = rank_b.find(a[i]);
    if (it == rank_b.end()) throw Error("rankings cover different ids (" + a[i] + ")");
    const double d = static_cast<double>(i) - static_cast<double>(it->second);
    sum += d * d;
  }
  const double sd = static_cast<double>(s);
  return 6.0 * sum / (sd * (sd * sd - 1.0));
}

Vector average_pooling_embedding(const ColumnMatrix& col) {
  if (col.rows() == 0) throw Error("column has no cells");
  Vector mean = col.colwise().mean().transpose();
  const double norm = mean.norm();
  if (norm == 0.0) throw Error("degenerate embedding");
  return mean / norm;
}

void write_metrics_csv(std::ostream& out, std::span<const MetricRow> rows) {
  out << "query_id,k,recall,ndcg\n";
  for (const auto& r : rows) out << r.query_id << ',' << r.k << ',' << r.recall << ',' << r.ndcg << '\n';
}

std::string metrics_summary_json(std::span<const MetricRow> rows) {
  struct Acc {
    double recall = 0.0, ndcg = 0.0;
    std::size_t n = 0;
  };
  std::map<std::size_t, Acc> by_k;
  for (const auto& r : rows) {
    auto& a = by_k[r.k];
    a.recall += r.recall;
    a.ndcg += r.ndcg;
    ++a.n;
  }
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& [k, a] : by_k) {
    doc[std::to_string(k)] = {{"recall", a.recall / static_cast<double>(a.n)},
                              {"ndcg", a.ndcg / static_cast<double>(a.n)},
                              {"queries", a.n}};
  }
  return doc.dump(2);
}

double median_ms(const std::function<void()>& fn, int runs) {
  if (runs < 1) throw Error("runs must be positive");
  std::vector<double> times;
  times.reserve(static_cast<std::size_t>(runs));
  for (int i = 0; i < runs; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  std::nth_element(times.begin(), times.begin() + static_cast<std::ptrdiff_t>(times.size() / 2), times.end());
  return times[times.size() / 2];
}

void write_timing_csv(std::ostream& out, std::span<const TimingRow> rows) {
  out << "kind,size,encode_ms,search_ms\n";
  for (const auto& r : rows) {
    out << r.kind << ',' << r.size << ',';
    if (r.kind == "encode") {
      out << r.encode_ms << ",\n";
    } else {
      out << ',' << r.search_ms << '\n';
    }
  }
}

}  // namespace proxyjoin
