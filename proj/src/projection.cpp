#include "proxyjoin/projection.hpp"

#include "binary_io.hpp"

#include <cmath>
#include <fstream>
#include <limits>

namespace proxyjoin {

namespace {

void check_dims(Eigen::Index a, Eigen::Index b) {
  if (a != b) {
    throw Error("dimension mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

// Min-cost perfect assignment on a square cost matrix (potentials-based
// Hungarian method, O(N^3)). Returns the assigned column for each row.
std::vector<int> hungarian_min(const Matrix& cost) {
  const int n = static_cast<int>(cost.rows());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> assignment(n, -1);
  for (int j = 1; j <= n; ++j) {
    if (p[j] != 0) assignment[p[j] - 1] = j - 1;
  }
  return assignment;
}

void write_params(std::ostream& out, const ProxySet& p) {
  const Matrix& s = p.stacked();
  for (Eigen::Index i = 0; i < s.size(); ++i) binio::put_f64(out, s.data()[i]);
}

void read_params(std::istream& in, ProxySet& p) {
  Matrix& s = p.stacked();
  for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = binio::get_f64(in);
}

}  // namespace

ProxySet::ProxySet(int l, int m, int d) : l_(l), m_(m), d_(d) {
  if (l < 1 || m < 1 || d < 1) throw Error("proxy set shape must be positive");
  data_ = Matrix::Zero(static_cast<Eigen::Index>(l) * m, d);
}

ProxySet ProxySet::random(int l, int m, int d, std::mt19937_64& rng) {
  ProxySet p(l, m, d);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (Eigen::Index r = 0; r < p.data_.rows(); ++r) {
    double norm = 0.0;
    while (norm == 0.0) {
      for (Eigen::Index k = 0; k < d; ++k) p.data_(r, k) = gauss(rng);
      norm = p.data_.row(r).norm();
    }
    p.data_.row(r) /= norm;
  }
  return p;
}

double agm_projection(const ColumnMatrix& col, const ProxyColumnMatrix& proxy) {
  check_dims(col.cols(), proxy.cols());
  if (proxy.rows() == 0) throw Error("proxy column matrix has no rows");
  const Matrix scores = col * proxy.transpose();
  double total = 0.0;
  for (Eigen::Index i = 0; i < scores.rows(); ++i) total += scores.row(i).maxCoeff();
  return total;
}

double exact_bipartite_matching(const ColumnMatrix& col, const ProxyColumnMatrix& proxy) {
  check_dims(col.cols(), proxy.cols());
  const Eigen::Index n = col.rows(), m = proxy.rows();
  if (n == 0 || m == 0) return 0.0;
  const Matrix weights = col * proxy.transpose();
  // Clamping at zero plus dummy padding turns "<= 1" constraints into a
  // square assignment: an edge assigned at weight 0 is an unmatched vertex.
  const Eigen::Index size = std::max(n, m);
  Matrix cost = Matrix::Zero(size, size);
  cost.topLeftCorner(n, m) = -weights.cwiseMax(0.0);
  const auto assignment = hungarian_min(cost);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int j = assignment[static_cast<std::size_t>(i)];
    if (j >= 0 && j < m) total += std::max(weights(i, j), 0.0);
  }
  return total;
}

Vector project_raw(const ColumnMatrix& col, const ProxySet& proxies) {
  check_dims(col.cols(), proxies.d());
  if (col.rows() == 0) throw Error("column has no cells");
  const int l = proxies.l(), m = proxies.m();
  Vector raw = Vector::Zero(l);
  // Row blocks keep the score buffer cache-sized for long columns.
  constexpr Eigen::Index kBlock = 128;
  Matrix scores;
  for (Eigen::Index start = 0; start < col.rows(); start += kBlock) {
    const Eigen::Index rows = std::min(kBlock, col.rows() - start);
    scores.noalias() = col.middleRows(start, rows) * proxies.stacked().transpose();
    for (Eigen::Index i = 0; i < rows; ++i) {
      const double* row = scores.row(i).data();
      for (int b = 0; b < l; ++b) {
        const double* blk = row + static_cast<std::ptrdiff_t>(b) * m;
        double best = blk[0];
        for (int j = 1; j < m; ++j) best = std::max(best, blk[j]);
        raw(b) += best;
      }
    }
  }
  return raw;
}

ProjectionTrace project_traced(const ColumnMatrix& col, const ProxySet& proxies) {
  check_dims(col.cols(), proxies.d());
  if (col.rows() == 0) throw Error("column has no cells");
  const Matrix scores = col * proxies.stacked().transpose();
  const int l = proxies.l(), m = proxies.m();
  ProjectionTrace t;
  t.raw = Vector::Zero(l);
  t.argmax.resize(col.rows(), l);
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    const double* row = scores.row(i).data();
    for (int b = 0; b < l; ++b) {
      const double* blk = row + static_cast<std::ptrdiff_t>(b) * m;
      int arg = 0;
      for (int j = 1; j < m; ++j) {
        if (blk[j] > blk[arg]) arg = j;
      }
      t.argmax(i, b) = arg;
      t.raw(b) += blk[arg];
    }
  }
  return t;
}

ColumnEmbedding column_embedding(const ColumnMatrix& col, const ProxySet& proxies) {
  Vector raw = project_raw(col, proxies);
  const double norm = raw.norm();
  if (norm == 0.0 || !std::isfinite(norm)) throw Error("degenerate embedding");
  return {raw / norm, true};
}

void save_checkpoint(const ProxyCheckpoint& ckpt, const std::filesystem::path& path) {
  const ProxySet& t = ckpt.target;
  const ProxySet& mo = ckpt.momentum;
  if (t.l() != mo.l() || t.m() != mo.m() || t.d() != mo.d()) {
    throw Error("target and momentum proxy sets differ in shape");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint: " + path.string());
  binio::put_magic(out, "SNPX");
  binio::put_u32(out, 1);
  binio::put_u32(out, static_cast<std::uint32_t>(t.l()));
  binio::put_u32(out, static_cast<std::uint32_t>(t.m()));
  binio::put_u32(out, static_cast<std::uint32_t>(t.d()));
  write_params(out, t);
  write_params(out, mo);
  binio::put_u64(out, ckpt.seed);
  if (!out) throw IoError("write failure: " + path.string());
}

ProxyCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint: " + path.string());
  binio::expect_magic(in, "SNPX");
  binio::expect_version(in, 1);
  const auto l = binio::get_u32(in);
  const auto m = binio::get_u32(in);
  const auto d = binio::get_u32(in);
  if (l == 0 || m == 0 || d == 0 || static_cast<std::uint64_t>(l) * m * d > (1ULL << 32)) {
    throw Error("implausible proxy set shape in checkpoint");
  }
  ProxyCheckpoint ckpt{ProxySet(static_cast<int>(l), static_cast<int>(m), static_cast<int>(d)),
                       ProxySet(static_cast<int>(l), static_cast<int>(m), static_cast<int>(d)), 0};
  read_params(in, ckpt.target);
  read_params(in, ckpt.momentum);
  ckpt.seed = binio::get_u64(in);
  return ckpt;
}

}  // namespace proxyjoin
