#pragma once

#include "proxyjoin/projection.hpp"
#include "proxyjoin/types.hpp"

#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

namespace proxyjoin {

struct TrainConfig {
  double temperature = 0.08;
  double momentum_alpha = 0.9999;
  int queue_len = 32;  // beta, in batches
  int batch_size = 64;
  int rank_list_len = 3;  // s
  double learning_rate = 0.01;
  int epochs = 10;
  std::uint64_t seed = 42;
  int l = 90;
  int m = 50;
  int d = 64;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  void validate() const;
};

// Anchor sub-column plus s synthesized positives ordered by intended
// joinability, highest first.
struct RankingList {
  std::size_t anchor = 0;
  ColumnMatrix anchor_matrix;
  std::vector<ColumnMatrix> positives;
  std::vector<double> target_scores;
};

// Supplies a fresh ranking list for a repository column each time it is
// drawn as an anchor.
class RankingSource {
 public:
  virtual ~RankingSource() = default;
  virtual RankingList make(std::size_t column, std::mt19937_64& rng) = 0;
};

// FIFO of batches of repository column indices. Gradient steps start once
// it holds beta + 1 batches.
class NegativeQueue {
 public:
  explicit NegativeQueue(int beta) : beta_(beta) {}

  void enqueue(std::vector<std::size_t> batch) { batches_.push_back(std::move(batch)); }
  bool ready() const { return static_cast<int>(batches_.size()) >= beta_ + 1; }
  std::vector<std::size_t> dequeue();
  std::vector<std::size_t> members() const;
  std::size_t size() const { return batches_.size(); }

 private:
  int beta_;
  std::deque<std::vector<std::size_t>> batches_;
};

struct AdamState {
  Matrix first;
  Matrix second;
  long long step = 0;
};

struct TrainState {
  ProxySet target;
  ProxySet momentum;
  AdamState adam;
  long long step = 0;

  // Target and momentum sets start out identical.
  static TrainState initialize(const TrainConfig& cfg, std::mt19937_64& rng);
};

double infonce_loss(const Vector& anchor, const Vector& positive, std::span<const Vector> negatives,
                    double t);

// Sum over ranks j of -log(e^{a.p_j/t} / (e^{a.p_j/t} + sum_neg + sum_{r>j} e^{a.p_r/t})).
double rank_aware_loss(const Vector& anchor, std::span<const Vector> positives,
                       std::span<const Vector> negatives, double t);

// Loss on precomputed similarities, with dL/dsim written to the two output
// spans when they are non-empty.
double rank_aware_loss_sims(std::span<const double> pos_sims, std::span<const double> neg_sims,
                            double t, std::span<double> d_pos = {}, std::span<double> d_neg = {});

struct AnchorLoss {
  double loss = 0.0;
  Matrix grad;  // shaped like the stacked target proxy set
};

// Anchor encoded with the target set; positives and negatives with the
// momentum set, which receives no gradient. `negative_embeddings` are the
// momentum-encoded negatives.
AnchorLoss anchor_loss_and_gradient(const TrainState& state, const ColumnMatrix& anchor,
                                    std::span<const Vector> positive_embeddings,
                                    std::span<const Vector> negative_embeddings, double t);

// Gradient of the rank-aware loss of one anchor w.r.t. the target proxies.
Matrix loss_gradient(const TrainState& state, const ColumnMatrix& anchor, const RankingList& ranking,
                     std::span<const ColumnMatrix> negatives, const TrainConfig& cfg);

// Same loss, value only; the finite-difference tests go through this.
double anchor_loss_value(const ProxySet& target, const ProxySet& momentum, const ColumnMatrix& anchor,
                         std::span<const ColumnMatrix> positives,
                         std::span<const ColumnMatrix> negatives, double t);

// P_m <- alpha * P_m + (1 - alpha) * P_t.
void momentum_update(TrainState& state, double alpha);

void adam_step(TrainState& state, const Matrix& grad, const TrainConfig& cfg);

struct TrainLogEntry {
  int epoch = 0;
  long long step = 0;
  double mean_loss = 0.0;
};

struct TrainResult {
  TrainState state;
  std::vector<TrainLogEntry> log;
  std::vector<double> epoch_mean_loss;  // NaN for epochs without a step
};

// Rank-aware contrastive learning over the repository's cached column
// matrices. Deterministic for a fixed cfg.seed.
TrainResult train(std::span<const ColumnMatrix> columns, const TrainConfig& cfg, RankingSource& source);

void write_train_log_csv(std::ostream& out, std::span<const TrainLogEntry> log);

}  // namespace proxyjoin
