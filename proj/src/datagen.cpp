#include "proxyjoin/datagen.hpp"

#include "json.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <ostream>

namespace proxyjoin {

namespace {

constexpr int kResynthesisAttempts = 5;

ColumnMatrix gather_rows(const ColumnMatrix& m, std::span<const std::size_t> rows) {
  ColumnMatrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(k);
  return idx;
}

bool non_increasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[i - 1]) return false;
  }
  return true;
}

std::vector<double> measured_scores(const RankingList& list, const MatchConfig& match) {
  std::vector<double> out;
  for (const auto& p : list.positives) out.push_back(joinability(list.anchor_matrix, p, match).value());
  return out;
}

}  // namespace

void SynthConfig::validate() const {
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw Error("split_ratio must be in (0,1)");
  if (!(score_min > 0.0 && score_min < score_max && score_max <= 1.0)) {
    throw Error("score range must satisfy 0 < min < max <= 1");
  }
  if (!(sigma > 0.0)) throw Error("sigma must be positive");
  if (!(gamma > 0.0 && gamma < 1.0)) throw Error("gamma must be in (0,1)");
  if (max_shrink < 0) throw Error("max_shrink must be non-negative");
}

SplitIndices split_column(std::size_t n, double ratio, std::mt19937_64& rng) {
  if (n < 4) throw Error("column too small to split (" + std::to_string(n) + " cells, need 4)");
  if (!(ratio > 0.0 && ratio < 1.0)) throw Error("split ratio must be in (0,1)");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  auto na = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
  na = std::clamp<std::size_t>(na, 1, n - 1);
  SplitIndices s;
  s.anchor.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(na));
  s.residual.assign(idx.begin() + static_cast<std::ptrdiff_t>(na), idx.end());
  return s;
}

std::pair<ColumnMatrix, ColumnMatrix> split_column(const ColumnMatrix& col, double ratio,
                                                   std::mt19937_64& rng) {
  const auto s = split_column(static_cast<std::size_t>(col.rows()), ratio, rng);
  return {gather_rows(col, s.anchor), gather_rows(col, s.residual)};
}

std::pair<std::vector<std::string>, std::vector<std::string>> split_column(
    std::span<const std::string> cells, double ratio, std::mt19937_64& rng) {
  const auto s = split_column(cells.size(), ratio, rng);
  std::pair<std::vector<std::string>, std::vector<std::string>> out;
  for (auto i : s.anchor) out.first.push_back(cells[i]);
  for (auto i : s.residual) out.second.push_back(cells[i]);
  return out;
}

std::size_t sample_count(double x, std::size_t n) {
  if (!(x > 0.0 && x <= 1.0)) throw Error("target joinability must be in (0,1]");
  // The epsilon keeps products like 0.7 * 20 from rounding up a whole cell.
  const auto k = static_cast<std::size_t>(std::ceil(x * static_cast<double>(n) - 1e-9));
  return std::clamp<std::size_t>(k, 1, n);
}

std::string augment_cell(const std::string& cell, std::mt19937_64& rng) {
  // Only ASCII positions are edited so multi-byte UTF-8 sequences stay intact.
  std::vector<std::size_t> ascii;
  for (std::size_t i = 0; i < cell.size(); ++i) {
    if (static_cast<unsigned char>(cell[i]) < 0x80) ascii.push_back(i);
  }
  if (ascii.empty()) return cell;
  std::uniform_int_distribution<int> pick_op(0, 3);
  std::uniform_int_distribution<std::size_t> pick_pos(0, ascii.size() - 1);
  const int op = pick_op(rng);
  const std::size_t pos = ascii[pick_pos(rng)];
  std::string out = cell;
  switch (op) {
    case 0: {
      if (pos + 1 < out.size() && static_cast<unsigned char>(out[pos + 1]) < 0x80) {
        std::swap(out[pos], out[pos + 1]);
      } else if (pos > 0 && static_cast<unsigned char>(out[pos - 1]) < 0x80) {
        std::swap(out[pos - 1], out[pos]);
      }
      break;
    }
    case 1:
      if (out.size() > 1) out.erase(pos, 1);
      break;
    case 2:
      out.insert(pos, 1, out[pos]);
      break;
    default: {
      const auto c = static_cast<unsigned char>(out[pos]);
      if (std::islower(c)) {
        out[pos] = static_cast<char>(std::toupper(c));
      } else if (std::isupper(c)) {
        out[pos] = static_cast<char>(std::tolower(c));
      }
      break;
    }
  }
  if (normalize_cell(out).empty()) return cell;
  return out;
}

std::vector<std::string> synth_text_positive(std::span<const std::string> anchor,
                                             std::span<const std::string> residual, double x,
                                             const SynthConfig& cfg, const Embedder& embedder,
                                             const MatchConfig& match, std::mt19937_64& rng) {
  if (anchor.empty()) throw Error("anchor sub-column is empty");
  const bool augment = cfg.augment && match.tau > 0.0;
  std::vector<std::string> out;
  for (auto i : sample_without_replacement(anchor.size(), sample_count(x, anchor.size()), rng)) {
    const std::string& c = anchor[i];
    if (!augment) {
      out.push_back(c);
      continue;
    }
    std::string aug = augment_cell(c, rng);
    if (aug != c && !cells_match(embedder.embed_cell(c), embedder.embed_cell(aug), match)) aug = c;
    out.push_back(std::move(aug));
  }
  out.insert(out.end(), residual.begin(), residual.end());
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

ColumnMatrix synth_embed_positive(const ColumnMatrix& anchor, const ColumnMatrix& residual, double x,
                                  const SynthConfig& cfg, const MatchConfig& match,
                                  std::mt19937_64& rng) {
  if (anchor.rows() == 0) throw Error("anchor sub-matrix is empty");
  if (residual.rows() > 0 && residual.cols() != anchor.cols()) throw Error("dimension mismatch");
  const auto picked = sample_without_replacement(static_cast<std::size_t>(anchor.rows()),
                                                 sample_count(x, static_cast<std::size_t>(anchor.rows())), rng);
  const bool augment = cfg.augment && match.tau > 0.0;
  const Eigen::Index d = anchor.cols();

  ColumnMatrix out(static_cast<Eigen::Index>(picked.size()) + residual.rows(), d);
  Eigen::Index r = 0;
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (auto i : picked) {
    const RowVector c = anchor.row(static_cast<Eigen::Index>(i));
    RowVector result = c;
    if (augment) {
      double sigma = cfg.sigma;
      for (int attempt = 0; attempt <= cfg.max_shrink; ++attempt, sigma *= cfg.gamma) {
        RowVector cand(d);
        for (Eigen::Index k = 0; k < d; ++k) cand(k) = c(k) + sigma * gauss(rng);
        const double norm = cand.norm();
        if (norm == 0.0) continue;
        cand /= norm;
        if (cells_match(c, cand, match)) {
          result = cand;
          break;
        }
      }
    }
    out.row(r++) = result;
  }
  if (residual.rows() > 0) out.bottomRows(residual.rows()) = residual;

  std::vector<Eigen::Index> perm(static_cast<std::size_t>(out.rows()));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  ColumnMatrix shuffled(out.rows(), d);
  for (std::size_t k = 0; k < perm.size(); ++k) shuffled.row(static_cast<Eigen::Index>(k)) = out.row(perm[k]);
  return shuffled;
}

std::vector<double> draw_scores(int s, const SynthConfig& cfg, std::mt19937_64& rng) {
  if (s < 1) throw Error("ranking list length must be >= 1");
  std::uniform_real_distribution<double> u(cfg.score_min, cfg.score_max);
  std::vector<double> scores;
  while (static_cast<int>(scores.size()) < s) {
    const double x = u(rng);
    if (x <= cfg.score_min || x >= cfg.score_max) continue;
    if (std::find(scores.begin(), scores.end(), x) != scores.end()) continue;
    scores.push_back(x);
  }
  std::sort(scores.begin(), scores.end(), std::greater<>());
  return scores;
}

RankingList build_ranking_list(std::size_t anchor_id, const ColumnMatrix& col, int s,
                               const SynthConfig& cfg, const MatchConfig& match, std::mt19937_64& rng,
                               std::size_t* violations) {
  auto [anchor, residual] = split_column(col, cfg.split_ratio, rng);
  RankingList list;
  list.anchor = anchor_id;
  list.target_scores = draw_scores(s, cfg, rng);
  list.anchor_matrix = std::move(anchor);
  for (int attempt = 0; attempt <= kResynthesisAttempts; ++attempt) {
    list.positives.clear();
    for (double x : list.target_scores) {
      list.positives.push_back(synth_embed_positive(list.anchor_matrix, residual, x, cfg, match, rng));
    }
    if (non_increasing(measured_scores(list, match))) return list;
  }
  if (violations != nullptr) ++*violations;
  return list;
}

RankingList build_text_ranking_list(std::size_t anchor_id, std::span<const std::string> cells, int s,
                                    const SynthConfig& cfg, const Embedder& embedder,
                                    const MatchConfig& match, std::mt19937_64& rng,
                                    std::size_t* violations) {
  auto [anchor, residual] = split_column(cells, cfg.split_ratio, rng);
  RankingList list;
  list.anchor = anchor_id;
  list.target_scores = draw_scores(s, cfg, rng);
  list.anchor_matrix = embedder.embed_column(anchor);
  for (int attempt = 0; attempt <= kResynthesisAttempts; ++attempt) {
    list.positives.clear();
    for (double x : list.target_scores) {
      const auto pos = synth_text_positive(anchor, residual, x, cfg, embedder, match, rng);
      list.positives.push_back(embedder.embed_column(pos));
    }
    if (non_increasing(measured_scores(list, match))) return list;
  }
  if (violations != nullptr) ++*violations;
  return list;
}

SynthRankingSource::SynthRankingSource(std::span<const ColumnMatrix> columns, int s, SynthConfig cfg,
                                       MatchConfig match)
    : columns_(columns), s_(s), cfg_(cfg), match_(match) {
  cfg_.validate();
  cfg_.mode = SynthMode::kEmbedding;
}

SynthRankingSource::SynthRankingSource(std::span<const std::vector<std::string>> cells,
                                       const Embedder& embedder, int s, SynthConfig cfg, MatchConfig match)
    : cells_(cells), embedder_(&embedder), s_(s), cfg_(cfg), match_(match) {
  cfg_.validate();
  cfg_.mode = SynthMode::kText;
}

RankingList SynthRankingSource::make(std::size_t column, std::mt19937_64& rng) {
  if (cfg_.mode == SynthMode::kText) {
    return build_text_ranking_list(column, cells_[column], s_, cfg_, *embedder_, match_, rng, &violations_);
  }
  return build_ranking_list(column, columns_[column], s_, cfg_, match_, rng, &violations_);
}

void write_ranking_jsonl(std::ostream& out, const std::string& anchor_id, const RankingList& list,
                         const MatchConfig& match) {
  const auto measured = measured_scores(list, match);
  for (std::size_t j = 0; j < list.positives.size(); ++j) {
    nlohmann::json row = {{"anchor_id", anchor_id},
                          {"rank", j + 1},
                          {"target_score", list.target_scores[j]},
                          {"measured_score", measured[j]}};
    out << row.dump() << '\n';
  }
}

}  // namespace proxyjoin
