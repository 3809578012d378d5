#pragma once

#include "proxyjoin/types.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

namespace proxyjoin {

// m x d proxy column matrix. Rows are free parameters and need not be unit-norm.
using ProxyColumnMatrix = Matrix;

// l proxy column matrices of shape m x d, stored stacked as an (l*m) x d
// matrix so that one GEMM scores a column against every proxy row.
class ProxySet {
 public:
  ProxySet() = default;
  ProxySet(int l, int m, int d);

  // i.i.d. standard Gaussian rows rescaled to unit norm.
  static ProxySet random(int l, int m, int d, std::mt19937_64& rng);

  int l() const { return l_; }
  int m() const { return m_; }
  int d() const { return d_; }

  Matrix& stacked() { return data_; }
  const Matrix& stacked() const { return data_; }

  auto proxy(int b) { return data_.middleRows(static_cast<Eigen::Index>(b) * m_, m_); }
  auto proxy(int b) const { return data_.middleRows(static_cast<Eigen::Index>(b) * m_, m_); }

  friend bool operator==(const ProxySet& a, const ProxySet& b) {
    return a.l_ == b.l_ && a.m_ == b.m_ && a.d_ == b.d_ && a.data_ == b.data_;
  }

 private:
  int l_ = 0, m_ = 0, d_ = 0;
  Matrix data_;
};

struct ColumnEmbedding {
  Vector values;
  bool normalized = false;
};

// Sum over column rows of the best dot product against any proxy row.
// Argmax ties resolve to the lowest proxy row index.
double agm_projection(const ColumnMatrix& col, const ProxyColumnMatrix& proxy);

// Optimal one-to-one matching value on the dot-product weights. Vertices may
// stay unmatched, so negative edges never contribute.
double exact_bipartite_matching(const ColumnMatrix& col, const ProxyColumnMatrix& proxy);

// Raw l-dimensional projection vector plus the per-row argmax routing used
// by the backward pass. argmax(i, b) is the winning row inside proxy b.
struct ProjectionTrace {
  Vector raw;
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> argmax;
};

Vector project_raw(const ColumnMatrix& col, const ProxySet& proxies);
ProjectionTrace project_traced(const ColumnMatrix& col, const ProxySet& proxies);

// Normalized projection vector. Throws Error("degenerate embedding") when all
// projections are zero.
ColumnEmbedding column_embedding(const ColumnMatrix& col, const ProxySet& proxies);

struct ProxyCheckpoint {
  ProxySet target;
  ProxySet momentum;
  std::uint64_t seed = 0;
};

void save_checkpoint(const ProxyCheckpoint& ckpt, const std::filesystem::path& path);
ProxyCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace proxyjoin
