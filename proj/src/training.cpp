#include "proxyjoin/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

namespace proxyjoin {

namespace {

void check_temperature(double t) {
  if (!(t > 0.0) || !std::isfinite(t)) throw Error("temperature must be positive");
}

Vector encode(const ColumnMatrix& col, const ProxySet& proxies) {
  return column_embedding(col, proxies).values;
}

}  // namespace

void TrainConfig::validate() const {
  check_temperature(temperature);
  if (!(momentum_alpha >= 0.0 && momentum_alpha < 1.0)) throw Error("momentum_alpha must be in [0,1)");
  if (queue_len < 1) throw Error("queue_len must be positive");
  if (batch_size < 1) throw Error("batch_size must be positive");
  if (rank_list_len < 1) throw Error("rank_list_len must be >= 1");
  if (!(learning_rate > 0.0)) throw Error("learning_rate must be positive");
  if (epochs < 0) throw Error("epochs must be non-negative");
  if (l < 1 || m < 1 || d < 1) throw Error("proxy set shape must be positive");
}

std::vector<std::size_t> NegativeQueue::dequeue() {
  if (batches_.empty()) throw Error("dequeue from empty queue");
  auto front = std::move(batches_.front());
  batches_.pop_front();
  return front;
}

std::vector<std::size_t> NegativeQueue::members() const {
  std::vector<std::size_t> out;
  for (const auto& b : batches_) out.insert(out.end(), b.begin(), b.end());
  return out;
}

TrainState TrainState::initialize(const TrainConfig& cfg, std::mt19937_64& rng) {
  TrainState s;
  s.target = ProxySet::random(cfg.l, cfg.m, cfg.d, rng);
  s.momentum = s.target;
  s.adam.first = Matrix::Zero(s.target.stacked().rows(), s.target.stacked().cols());
  s.adam.second = s.adam.first;
  return s;
}

double rank_aware_loss_sims(std::span<const double> pos_sims, std::span<const double> neg_sims,
                            double t, std::span<double> d_pos, std::span<double> d_neg) {
  check_temperature(t);
  const std::size_t s = pos_sims.size();
  if (s == 0) throw Error("ranking list is empty");
  const bool want_grad = !d_pos.empty();
  if (want_grad) {
    std::fill(d_pos.begin(), d_pos.end(), 0.0);
    std::fill(d_neg.begin(), d_neg.end(), 0.0);
  }

  double total = 0.0;
  for (std::size_t j = 0; j < s; ++j) {
    // Denominator: the positive itself, lower-ranked positives, true negatives.
    double hi = pos_sims[j];
    for (std::size_t r = j + 1; r < s; ++r) hi = std::max(hi, pos_sims[r]);
    for (double x : neg_sims) hi = std::max(hi, x);
    double acc = 0.0;
    for (std::size_t r = j; r < s; ++r) acc += std::exp((pos_sims[r] - hi) / t);
    for (double x : neg_sims) acc += std::exp((x - hi) / t);
    const double lse = hi / t + std::log(acc);
    total += lse - pos_sims[j] / t;

    if (want_grad) {
      for (std::size_t r = j; r < s; ++r) d_pos[r] += std::exp(pos_sims[r] / t - lse) / t;
      d_pos[j] -= 1.0 / t;
      for (std::size_t i = 0; i < neg_sims.size(); ++i) {
        d_neg[i] += std::exp(neg_sims[i] / t - lse) / t;
      }
    }
  }
  return total;
}

double rank_aware_loss(const Vector& anchor, std::span<const Vector> positives,
                       std::span<const Vector> negatives, double t) {
  check_temperature(t);
  std::vector<double> ps, ns;
  for (const auto& p : positives) {
    if (p.size() != anchor.size()) throw Error("embedding length mismatch");
    ps.push_back(anchor.dot(p));
  }
  for (const auto& n : negatives) {
    if (n.size() != anchor.size()) throw Error("embedding length mismatch");
    ns.push_back(anchor.dot(n));
  }
  return rank_aware_loss_sims(ps, ns, t);
}

double infonce_loss(const Vector& anchor, const Vector& positive, std::span<const Vector> negatives,
                    double t) {
  return rank_aware_loss(anchor, std::span<const Vector>(&positive, 1), negatives, t);
}

AnchorLoss anchor_loss_and_gradient(const TrainState& state, const ColumnMatrix& anchor,
                                    std::span<const Vector> positive_embeddings,
                                    std::span<const Vector> negative_embeddings, double t) {
  const ProjectionTrace trace = project_traced(anchor, state.target);
  const double norm = trace.raw.norm();
  if (norm == 0.0 || !std::isfinite(norm)) throw Error("degenerate embedding");
  const Vector a = trace.raw / norm;

  std::vector<double> ps(positive_embeddings.size()), ns(negative_embeddings.size());
  for (std::size_t j = 0; j < ps.size(); ++j) ps[j] = a.dot(positive_embeddings[j]);
  for (std::size_t i = 0; i < ns.size(); ++i) ns[i] = a.dot(negative_embeddings[i]);
  std::vector<double> dps(ps.size()), dns(ns.size());

  AnchorLoss out;
  out.loss = rank_aware_loss_sims(ps, ns, t, dps, dns);

  Vector grad_a = Vector::Zero(a.size());
  for (std::size_t j = 0; j < ps.size(); ++j) grad_a += dps[j] * positive_embeddings[j];
  for (std::size_t i = 0; i < ns.size(); ++i) grad_a += dns[i] * negative_embeddings[i];
  // Back through a = raw / |raw|.
  const Vector grad_raw = (grad_a - a * a.dot(grad_a)) / norm;

  // Each projection b is sum_i <c_i, p_{b, argmax}>, so row i routes its
  // gradient to the winning proxy row only.
  const ProxySet& P = state.target;
  out.grad = Matrix::Zero(P.stacked().rows(), P.stacked().cols());
  const int m = P.m();
  for (Eigen::Index i = 0; i < anchor.rows(); ++i) {
    for (int b = 0; b < P.l(); ++b) {
      out.grad.row(static_cast<Eigen::Index>(b) * m + trace.argmax(i, b)) += grad_raw(b) * anchor.row(i);
    }
  }
  return out;
}

Matrix loss_gradient(const TrainState& state, const ColumnMatrix& anchor, const RankingList& ranking,
                     std::span<const ColumnMatrix> negatives, const TrainConfig& cfg) {
  std::vector<Vector> pos, neg;
  for (const auto& p : ranking.positives) pos.push_back(encode(p, state.momentum));
  for (const auto& n : negatives) neg.push_back(encode(n, state.momentum));
  return anchor_loss_and_gradient(state, anchor, pos, neg, cfg.temperature).grad;
}

double anchor_loss_value(const ProxySet& target, const ProxySet& momentum, const ColumnMatrix& anchor,
                         std::span<const ColumnMatrix> positives,
                         std::span<const ColumnMatrix> negatives, double t) {
  std::vector<Vector> pos, neg;
  for (const auto& p : positives) pos.push_back(encode(p, momentum));
  for (const auto& n : negatives) neg.push_back(encode(n, momentum));
  return rank_aware_loss(encode(anchor, target), pos, neg, t);
}

void momentum_update(TrainState& state, double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw Error("momentum alpha must be in [0,1)");
  Matrix& pm = state.momentum.stacked();
  const Matrix& pt = state.target.stacked();
  if (pm.rows() != pt.rows() || pm.cols() != pt.cols()) throw Error("proxy set shape mismatch");
  pm = alpha * pm + (1.0 - alpha) * pt;
}

void adam_step(TrainState& state, const Matrix& grad, const TrainConfig& cfg) {
  AdamState& a = state.adam;
  Matrix& w = state.target.stacked();
  if (a.first.rows() != w.rows() || a.first.cols() != w.cols()) {
    a.first = Matrix::Zero(w.rows(), w.cols());
    a.second = a.first;
  }
  ++a.step;
  a.first = cfg.adam_beta1 * a.first + (1.0 - cfg.adam_beta1) * grad;
  a.second = cfg.adam_beta2 * a.second + (1.0 - cfg.adam_beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(a.step));
  const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(a.step));
  w.array() -= cfg.learning_rate * (a.first.array() / c1) /
               ((a.second.array() / c2).sqrt() + cfg.adam_epsilon);
}

TrainResult train(std::span<const ColumnMatrix> columns, const TrainConfig& cfg, RankingSource& source) {
  cfg.validate();
  const std::size_t need = static_cast<std::size_t>(cfg.batch_size) * (cfg.queue_len + 1);
  if (columns.size() < need) {
    throw Error("repository has " + std::to_string(columns.size()) + " columns, training needs at least " +
                std::to_string(need) + " (batch_size * (queue_len + 1))");
  }
  for (const auto& c : columns) {
    if (c.cols() != cfg.d) throw Error("column matrix dimension differs from proxy dimension");
  }

  std::mt19937_64 rng(cfg.seed);
  TrainResult result;
  result.state = TrainState::initialize(cfg, rng);
  TrainState& state = result.state;
  NegativeQueue queue(cfg.queue_len);

  std::vector<std::size_t> order(columns.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_sum = 0.0;
    int epoch_steps = 0;

    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      queue.enqueue(std::vector<std::size_t>(order.begin() + static_cast<std::ptrdiff_t>(start),
                                             order.begin() + static_cast<std::ptrdiff_t>(stop)));
      if (!queue.ready()) continue;

      const auto current = queue.dequeue();
      const auto negative_ids = queue.members();
      std::vector<Vector> negatives;
      negatives.reserve(negative_ids.size());
      for (auto id : negative_ids) negatives.push_back(encode(columns[id], state.momentum));

      Matrix grad = Matrix::Zero(state.target.stacked().rows(), state.target.stacked().cols());
      double batch_loss = 0.0;
      for (auto id : current) {
        RankingList list = source.make(id, rng);
        if (list.positives.empty()) throw Error("ranking source produced an empty list");
        std::vector<Vector> pos;
        pos.reserve(list.positives.size());
        for (const auto& p : list.positives) pos.push_back(encode(p, state.momentum));
        AnchorLoss al = anchor_loss_and_gradient(state, list.anchor_matrix, pos, negatives, cfg.temperature);
        batch_loss += al.loss;
        grad += al.grad;
      }
      const double inv = 1.0 / static_cast<double>(current.size());
      grad *= inv;
      batch_loss *= inv;

      adam_step(state, grad, cfg);
      momentum_update(state, cfg.momentum_alpha);
      ++state.step;
      result.log.push_back({epoch, state.step, batch_loss});
      epoch_sum += batch_loss;
      ++epoch_steps;
    }
    result.epoch_mean_loss.push_back(epoch_steps > 0 ? epoch_sum / epoch_steps
                                                     : std::numeric_limits<double>::quiet_NaN());
  }
  return result;
}

void write_train_log_csv(std::ostream& out, std::span<const TrainLogEntry> log) {
  out << "epoch,step,mean_loss\n";
  for (const auto& e : log) out << e.epoch << ',' << e.step << ',' << e.mean_loss << '\n';
}

}  // namespace proxyjoin
