#pragma once

#include "proxyjoin/embedder.hpp"
#include "proxyjoin/matching.hpp"
#include "proxyjoin/training.hpp"

#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace proxyjoin {

enum class SynthMode { kText, kEmbedding };

struct SynthConfig {
  double split_ratio = 0.5;
  double score_min = 0.6;
  double score_max = 0.9;
  double sigma = 0.1;
  double gamma = 0.5;
  int max_shrink = 10;
  SynthMode mode = SynthMode::kEmbedding;
  bool augment = true;

  void validate() const;
};

struct SplitIndices {
  std::vector<std::size_t> anchor;
  std::vector<std::size_t> residual;
};

// Seeded shuffle, then the first max(1, round(ratio * n)) positions form the
// anchor; the residual always keeps at least one element. Needs n >= 4.
SplitIndices split_column(std::size_t n, double ratio, std::mt19937_64& rng);

std::pair<ColumnMatrix, ColumnMatrix> split_column(const ColumnMatrix& col, double ratio,
                                                   std::mt19937_64& rng);
std::pair<std::vector<std::string>, std::vector<std::string>> split_column(
    std::span<const std::string> cells, double ratio, std::mt19937_64& rng);

// Number of anchor rows sampled for target joinability x in (0, 1].
std::size_t sample_count(double x, std::size_t n);

// One character-level edit: adjacent swap, deletion, duplication or case flip.
std::string augment_cell(const std::string& cell, std::mt19937_64& rng);

// shuffle(S'_a || C_b) where S'_a are ceil(x * |C_a|) sampled anchor cells,
// each augmented unless the edit moves it beyond tau.
std::vector<std::string> synth_text_positive(std::span<const std::string> anchor,
                                             std::span<const std::string> residual, double x,
                                             const SynthConfig& cfg, const Embedder& embedder,
                                             const MatchConfig& match, std::mt19937_64& rng);

// Embedding-level counterpart: Gaussian perturbation with sigma shrinking by
// gamma until the perturbed unit vector is within tau of its source.
ColumnMatrix synth_embed_positive(const ColumnMatrix& anchor, const ColumnMatrix& residual, double x,
                                  const SynthConfig& cfg, const MatchConfig& match,
                                  std::mt19937_64& rng);

// s distinct scores from (score_min, score_max), sorted descending.
std::vector<double> draw_scores(int s, const SynthConfig& cfg, std::mt19937_64& rng);

// Embedding-mode list for one column. Resynthesizes up to five times when the
// measured joinabilities are not non-increasing; `violations` counts lists
// accepted anyway.
RankingList build_ranking_list(std::size_t anchor_id, const ColumnMatrix& col, int s,
                               const SynthConfig& cfg, const MatchConfig& match, std::mt19937_64& rng,
                               std::size_t* violations = nullptr);

RankingList build_text_ranking_list(std::size_t anchor_id, std::span<const std::string> cells, int s,
                                    const SynthConfig& cfg, const Embedder& embedder,
                                    const MatchConfig& match, std::mt19937_64& rng,
                                    std::size_t* violations = nullptr);

// Feeds the training loop from either synthesis mode.
class SynthRankingSource : public RankingSource {
 public:
  // Embedding mode over cached column matrices.
  SynthRankingSource(std::span<const ColumnMatrix> columns, int s, SynthConfig cfg, MatchConfig match);
  // Text mode over raw cells.
  SynthRankingSource(std::span<const std::vector<std::string>> cells, const Embedder& embedder, int s,
                     SynthConfig cfg, MatchConfig match);

  RankingList make(std::size_t column, std::mt19937_64& rng) override;
  std::size_t violations() const { return violations_; }

 private:
  std::span<const ColumnMatrix> columns_;
  std::span<const std::vector<std::string>> cells_;
  const Embedder* embedder_ = nullptr;
  int s_;
  SynthConfig cfg_;
  MatchConfig match_;
  std::size_t violations_ = 0;
};

void write_ranking_jsonl(std::ostream& out, const std::string& anchor_id, const RankingList& list,
                         const MatchConfig& match);

}  // namespace proxyjoin
