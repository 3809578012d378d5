#include "proxyjoin/datagen.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <set>
#include <sstream>

using namespace proxyjoin;
using testing_support::random_unit_rows;

TEST(SplitColumn, PartitionsIndicesWithBothSidesNonEmpty) {
  std::mt19937_64 rng(1);
  for (std::size_t n : {4u, 5u, 10u, 31u}) {
    for (double ratio : {0.01, 0.5, 0.99}) {
      const auto s = split_column(n, ratio, rng);
      EXPECT_GE(s.anchor.size(), 1u);
      EXPECT_GE(s.residual.size(), 1u);
      std::set<std::size_t> all(s.anchor.begin(), s.anchor.end());
      all.insert(s.residual.begin(), s.residual.end());
      EXPECT_EQ(all.size(), n);
    }
  }
  EXPECT_EQ(split_column(10, 0.5, rng).anchor.size(), 5u);
}

TEST(SplitColumn, RejectsTinyColumns) {
  std::mt19937_64 rng(2);
  EXPECT_THROW(split_column(3, 0.5, rng), Error);
  EXPECT_THROW(split_column(10, 1.0, rng), Error);
}

TEST(SplitColumn, MatrixAndCellOverloadsAgreeWithIndices) {
  std::mt19937_64 a(3), b(3);
  const ColumnMatrix col = random_unit_rows(8, 4, a);
  std::mt19937_64 r1(9), r2(9);
  const auto idx = split_column(8, 0.5, r1);
  const auto [anchor, residual] = split_column(col, 0.5, r2);
  ASSERT_EQ(anchor.rows(), static_cast<Eigen::Index>(idx.anchor.size()));
  for (std::size_t i = 0; i < idx.anchor.size(); ++i) {
    EXPECT_EQ(RowVector(anchor.row(static_cast<Eigen::Index>(i))), RowVector(col.row(static_cast<Eigen::Index>(idx.anchor[i]))));
  }
  EXPECT_EQ(residual.rows(), 4);
}

TEST(SampleCount, CeilingOfFraction) {
  EXPECT_EQ(sample_count(0.6, 5), 3u);
  EXPECT_EQ(sample_count(1.0, 5), 5u);
  EXPECT_EQ(sample_count(0.2, 7), 2u);
  EXPECT_EQ(sample_count(0.7, 20), 14u);
  EXPECT_EQ(sample_count(0.01, 10), 1u);
  EXPECT_THROW(sample_count(0.0, 5), Error);
}

TEST(DrawScores, DistinctDescendingInsideOpenInterval) {
  std::mt19937_64 rng(4);
  SynthConfig cfg;
  for (int trial = 0; trial < 200; ++trial) {
    const auto s = draw_scores(3, cfg, rng);
    ASSERT_EQ(s.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_GT(s[i], 0.6);
      EXPECT_LT(s[i], 0.9);
      if (i > 0) EXPECT_LT(s[i], s[i - 1]);
    }
  }
  EXPECT_THROW(draw_scores(0, cfg, rng), Error);
}

TEST(EmbedPositive, JoinabilityTracksTargetAndCellsStayWithinTau) {
  std::mt19937_64 rng(5);
  const SynthConfig cfg;
  const MatchConfig match{0.2};
  for (int trial = 0; trial < 100; ++trial) {
    const ColumnMatrix anchor = random_unit_rows(10, 32, rng);
    const ColumnMatrix residual = random_unit_rows(9, 32, rng);
    const double x = 0.6 + 0.3 * (trial % 10) / 10.0;
    const ColumnMatrix pos = synth_embed_positive(anchor, residual, x, cfg, match, rng);
    EXPECT_EQ(pos.rows(), static_cast<Eigen::Index>(sample_count(x, 10)) + 9);
    EXPECT_LE(std::abs(joinability(anchor, pos, match).value() - x), 1.0 / 10.0 + 1e-12);
    for (Eigen::Index i = 0; i < pos.rows(); ++i) EXPECT_NEAR(pos.row(i).norm(), 1.0, 1e-12);
  }
}

TEST(EmbedPositive, PerturbedCellsAreWithinTauOfTheirSource) {
  std::mt19937_64 rng(6);
  SynthConfig cfg;
  cfg.sigma = 0.5;
  const MatchConfig match{0.2};
  const ColumnMatrix anchor = random_unit_rows(20, 16, rng);
  const ColumnMatrix empty(0, 16);
  const ColumnMatrix pos = synth_embed_positive(anchor, empty, 1.0, cfg, match, rng);
  ASSERT_EQ(pos.rows(), 20);
  for (Eigen::Index i = 0; i < pos.rows(); ++i) {
    double best = 1e9;
    for (Eigen::Index j = 0; j < anchor.rows(); ++j) best = std::min(best, (pos.row(i) - anchor.row(j)).norm());
    EXPECT_LE(best, 0.2);
    EXPECT_GT(best, 0.0);
  }
}

TEST(EmbedPositive, EquiJoinModeCopiesCellsExactly) {
  std::mt19937_64 rng(7);
  const ColumnMatrix anchor = random_unit_rows(6, 8, rng);
  const ColumnMatrix pos = synth_embed_positive(anchor, ColumnMatrix(0, 8), 1.0, SynthConfig{}, MatchConfig{0.0}, rng);
  EXPECT_DOUBLE_EQ(joinability(anchor, pos, MatchConfig{0.0}).value(), 1.0);
}

TEST(AugmentCell, SingleEditKeepsNonAsciiIntact) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 500; ++trial) {
    const std::string src = "Zürich Main";
    const std::string out = augment_cell(src, rng);
    EXPECT_LE(std::abs(static_cast<long>(out.size()) - static_cast<long>(src.size())), 1);
    EXPECT_NE(out.find("\xC3\xBC"), std::string::npos);
    EXPECT_FALSE(normalize_cell(out).empty());
  }
  EXPECT_EQ(augment_cell("\xC3\xBC", rng), "\xC3\xBC");
}

TEST(TextPositive, AugmentedCellsMatchTheirSourceAndResidualIsKept) {
  std::mt19937_64 rng(9);
  EmbedderConfig ec;
  ec.dimension = 128;
  const Embedder emb(ec);
  const MatchConfig match{0.6};
  const std::vector<std::string> anchor = {"Springfield", "Shelbyville", "Capital City", "Ogdenville", "North Haverbrook"};
  const std::vector<std::string> residual = {"Brockway", "Cypress Creek"};
  for (int trial = 0; trial < 30; ++trial) {
    const auto pos = synth_text_positive(anchor, residual, 0.8, SynthConfig{}, emb, match, rng);
    EXPECT_EQ(pos.size(), sample_count(0.8, anchor.size()) + residual.size());
    for (const auto& r : residual) EXPECT_NE(std::find(pos.begin(), pos.end(), r), pos.end());
    const ColumnMatrix a = emb.embed_column(anchor);
    for (const auto& cell : pos) {
      if (std::find(residual.begin(), residual.end(), cell) != residual.end()) continue;
      const RowVector v = emb.embed_cell(cell);
      double best = 1e9;
      for (Eigen::Index j = 0; j < a.rows(); ++j) best = std::min(best, (v - a.row(j)).norm());
      EXPECT_LE(best, match.tau) << cell;
    }
  }
}

TEST(RankingList, MeasuredScoresMostlyNonIncreasing) {
  std::mt19937_64 rng(10);
  const MatchConfig match;
  std::size_t violations = 0;
  int ordered = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const ColumnMatrix col = random_unit_rows(24, 32, rng);
    const auto list = build_ranking_list(static_cast<std::size_t>(trial), col, 3, SynthConfig{}, match, rng, &violations);
    ASSERT_EQ(list.positives.size(), 3u);
    std::vector<double> m;
    for (const auto& p : list.positives) m.push_back(joinability(list.anchor_matrix, p, match).value());
    if (m[0] >= m[1] && m[1] >= m[2]) ++ordered;
  }
  EXPECT_GE(ordered, 190);
  EXPECT_EQ(static_cast<int>(violations), 200 - ordered);
}

TEST(RankingList, JsonlReportsTargetAndMeasuredScores) {
  std::mt19937_64 rng(11);
  const auto list = build_ranking_list(0, random_unit_rows(12, 16, rng), 2, SynthConfig{}, MatchConfig{}, rng);
  std::ostringstream out;
  write_ranking_jsonl(out, "t:c", list, MatchConfig{});
  const std::string s = out.str();
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 2);
  EXPECT_NE(s.find("\"measured_score\""), std::string::npos);
  EXPECT_NE(s.find("\"anchor_id\":\"t:c\""), std::string::npos);
}

TEST(SynthConfig, Validation) {
  SynthConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.score_min = 0.95;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.gamma = 1.0;
  EXPECT_THROW(cfg.validate(), Error);
}
