#include "proxyjoin/eval.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

using namespace proxyjoin;

namespace {

RankedResult ranked(std::initializer_list<std::string> ids) {
  RankedResult r{"q", {}};
  for (const auto& id : ids) r.entries.emplace_back(id, 0.0);
  return r;
}

// DCG written out term by term, ideal taken from the truth order.
double oracle_ndcg(const std::vector<std::string>& approx, const std::vector<std::string>& truth,
                   const std::unordered_map<std::string, double>& gain, std::size_t k) {
  double dcg = 0.0, idcg = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double discount = std::log(static_cast<double>(i) + 2.0) / std::log(2.0);
    if (i < approx.size()) dcg += gain.at(approx[i]) / discount;
    if (i < truth.size()) idcg += gain.at(truth[i]) / discount;
  }
  return idcg == 0.0 ? (dcg == 0.0 ? 1.0 : 0.0) : dcg / idcg;
}

}  // namespace

TEST(Recall, OverlapOfTopK) {
  const auto truth = ranked({"a", "b", "c", "d"});
  EXPECT_DOUBLE_EQ(recall_at_k(ranked({"a", "x", "c", "y"}), truth, 4), 0.5);
  EXPECT_DOUBLE_EQ(recall_at_k(ranked({"b", "a"}), truth, 2), 1.0);
  EXPECT_DOUBLE_EQ(recall_at_k(ranked({"c", "d"}), truth, 2), 0.0);
  EXPECT_THROW(recall_at_k(truth, truth, 0), Error);
}

TEST(Ndcg, PerfectRankingIsOne) {
  const std::unordered_map<std::string, double> g = {{"a", 1.0}, {"b", 0.5}, {"c", 0.2}};
  EXPECT_DOUBLE_EQ(ndcg_at_k(ranked({"a", "b", "c"}), ranked({"a", "b", "c"}), g, 3), 1.0);
}

TEST(Ndcg, AgreesWithTermByTermOracle) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::string> pool;
  for (int i = 0; i < 30; ++i) pool.push_back("c" + std::to_string(i));
  for (int trial = 0; trial < 100; ++trial) {
    std::unordered_map<std::string, double> g;
    for (const auto& id : pool) g[id] = u(rng) < 0.3 ? 0.0 : u(rng);
    std::vector<std::string> truth = pool;
    std::sort(truth.begin(), truth.end(), [&](const auto& a, const auto& b) { return g[a] > g[b]; });
    std::vector<std::string> approx = pool;
    std::shuffle(approx.begin(), approx.end(), rng);
    RankedResult ra{"q", {}}, rt{"q", {}};
    for (std::size_t i = 0; i < 15; ++i) {
      ra.entries.emplace_back(approx[i], 0.0);
      rt.entries.emplace_back(truth[i], 0.0);
    }
    for (std::size_t k : {5u, 10u, 15u}) {
      const std::vector<std::string> a(approx.begin(), approx.begin() + 15), t(truth.begin(), truth.begin() + 15);
      EXPECT_NEAR(ndcg_at_k(ra, rt, g, k), oracle_ndcg(a, t, g, k), 1e-12);
    }
  }
}

TEST(Ndcg, ZeroIdealGain) {
  const std::unordered_map<std::string, double> g = {{"a", 0.0}, {"b", 0.0}};
  EXPECT_DOUBLE_EQ(ndcg_at_k(ranked({"a"}), ranked({"b"}), g, 1), 1.0);
}

TEST(Ndcg, MissingGainThrows) {
  const std::unordered_map<std::string, double> g = {{"a", 1.0}};
  EXPECT_THROW(ndcg_at_k(ranked({"zz"}), ranked({"a"}), g, 1), Error);
}

TEST(SpearmanShift, KnownValues) {
  const std::vector<std::string> a = {"x", "y", "z"};
  EXPECT_DOUBLE_EQ(spearman_shift(a, a), 0.0);
  const std::vector<std::string> rev = {"z", "y", "x"};
  EXPECT_DOUBLE_EQ(spearman_shift(a, rev), 2.0);
  const std::vector<std::string> swap = {"y", "x", "z"};
  EXPECT_DOUBLE_EQ(spearman_shift(a, swap), 0.5);
}

TEST(SpearmanShift, RejectsMismatchedRankings) {
  const std::vector<std::string> a = {"x", "y"};
  const std::vector<std::string> b = {"x", "q"};
  const std::vector<std::string> dup = {"x", "x"};
  const std::vector<std::string> one = {"x"};
  EXPECT_THROW(spearman_shift(a, b), Error);
  EXPECT_THROW(spearman_shift(dup, a), Error);
  EXPECT_THROW(spearman_shift(one, one), Error);
}

TEST(AveragePooling, NormalizedMeanOfRows) {
  ColumnMatrix col(2, 2);
  col << 1, 0, 0, 1;
  const Vector v = average_pooling_embedding(col);
  EXPECT_NEAR(v(0), std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(v(1), std::sqrt(0.5), 1e-15);
  ColumnMatrix opposite(2, 2);
  opposite << 1, 0, -1, 0;
  EXPECT_THROW(average_pooling_embedding(opposite), Error);
}

TEST(MetricsOutput, CsvAndSummary) {
  const std::vector<MetricRow> rows = {{"q1", 5, 0.4, 0.8}, {"q2", 5, 0.6, 1.0}};
  std::ostringstream csv;
  write_metrics_csv(csv, rows);
  EXPECT_EQ(csv.str(), "query_id,k,recall,ndcg\nq1,5,0.4,0.8\nq2,5,0.6,1\n");
  const std::string js = metrics_summary_json(rows);
  EXPECT_NE(js.find("\"5\""), std::string::npos);
  EXPECT_NE(js.find("\"queries\": 2"), std::string::npos);
}

TEST(TimingOutput, OneRowPerMeasurement) {
  const std::vector<TimingRow> rows = {{"encode", 64, 1.5, 0.0}, {"search", 1000, 0.0, 0.25}};
  std::ostringstream out;
  write_timing_csv(out, rows);
  EXPECT_EQ(out.str(), "kind,size,encode_ms,search_ms\nencode,64,1.5,\nsearch,1000,,0.25\n");
}

TEST(MedianMs, RunsTheFunctionEachTime) {
  int calls = 0;
  const double ms = median_ms([&] { ++calls; }, 5);
  EXPECT_EQ(calls, 5);
  EXPECT_GE(ms, 0.0);
  EXPECT_THROW(median_ms([] {}, 0), Error);
}
