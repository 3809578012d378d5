#include "proxyjoin/embedder.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>

namespace proxyjoin {

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = kFnvOffset ^ (seed * 0x9E3779B97F4A7C15ULL);
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  // splitmix64 finalizer; FNV alone leaves the low bits poorly mixed.
  h ^= h >> 30;
  h *= 0xBF58476D1CE4E5B9ULL;
  h ^= h >> 27;
  h *= 0x94D049BB133111EBULL;
  h ^= h >> 31;
  return h;
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    std::size_t j = i;
    while (j < s.size() && !is_space(s[j])) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

// Zero vectors map to e1 so that every emitted embedding is unit-norm.
void normalize_or_basis(RowVector& v) {
  const double norm = v.norm();
  if (norm == 0.0 || !std::isfinite(norm)) {
    v.setZero();
    v(0) = 1.0;
    return;
  }
  v /= norm;
}

double parse_double(std::string_view tok, std::size_t line) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(value)) {
    throw ParseError("bad vector component '" + std::string(tok) + "'", line);
  }
  return value;
}

bool parse_uint(std::string_view tok, long long& out) {
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && ptr == tok.data() + tok.size() && out >= 0;
}

}  // namespace

void EmbedderConfig::validate() const {
  if (dimension < 2) throw Error("embedder dimension must be >= 2");
  if (kind == EmbedderKind::kHashedNgram) {
    if (ngram_min < 1 || ngram_min > ngram_max) throw Error("invalid ngram range");
  } else if (vector_file_path.empty()) {
    throw Error("word-vector embedder needs vector_file_path");
  }
}

const RowVector* WordVectorTable::find(std::string_view token) const {
  auto it = vectors_.find(std::string(token));
  return it == vectors_.end() ? nullptr : &it->second;
}

WordVectorTable load_word_vectors(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read word vectors: " + path.string());

  WordVectorTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto toks = split_ws(line);
    if (toks.empty()) continue;

    long long a = 0, b = 0;
    if (line_no == 1 && toks.size() == 2 && parse_uint(toks[0], a) && parse_uint(toks[1], b)) {
      table.dimension_ = static_cast<int>(b);
      continue;
    }
    const int dim = static_cast<int>(toks.size()) - 1;
    if (dim < 1) throw ParseError("vector line without components", line_no);
    if (table.dimension_ == 0) {
      table.dimension_ = dim;
    } else if (dim != table.dimension_) {
      throw ParseError("dimension mismatch: expected " + std::to_string(table.dimension_) +
                           ", got " + std::to_string(dim),
                       line_no);
    }
    RowVector v(dim);
    for (int k = 0; k < dim; ++k) v(k) = parse_double(toks[k + 1], line_no);
    table.vectors_.insert_or_assign(std::string(toks[0]), std::move(v));
  }
  if (in.bad()) throw IoError("read failure: " + path.string());
  return table;
}

std::string normalize_cell(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

Embedder::Embedder(EmbedderConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.kind == EmbedderKind::kWordVectorFile) {
    if (cfg_.vector_file_path.empty()) throw Error("word-vector embedder needs vector_file_path");
    table_ = std::make_shared<const WordVectorTable>(load_word_vectors(cfg_.vector_file_path));
    if (table_->dimension() != cfg_.dimension) {
      throw Error("word vectors have dimension " + std::to_string(table_->dimension()) + " but embedder.dimension is " +
                  std::to_string(cfg_.dimension));
    }
  }
  cfg_.validate();
}

RowVector Embedder::hashed(std::string_view text) const {
  // fastText-style boundary markers so one-character cells still have n-grams.
  std::string padded;
  padded.reserve(text.size() + 2);
  padded.push_back('<');
  padded.append(text);
  padded.push_back('>');

  const int ngmin = cfg_.kind == EmbedderKind::kHashedNgram ? cfg_.ngram_min : 2;
  const int ngmax = cfg_.kind == EmbedderKind::kHashedNgram ? cfg_.ngram_max : 3;
  RowVector v = RowVector::Zero(cfg_.dimension);
  const auto n = static_cast<int>(padded.size());
  for (int len = ngmin; len <= ngmax; ++len) {
    for (int i = 0; i + len <= n; ++i) {
      const std::uint64_t h = fnv1a(std::string_view(padded).substr(i, len), cfg_.seed);
      const auto bucket = static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(cfg_.dimension));
      v(bucket) += (h >> 63) != 0 ? -1.0 : 1.0;
    }
  }
  normalize_or_basis(v);
  return v;
}

RowVector Embedder::embed_cell(std::string_view text) const {
  const std::string norm = normalize_cell(text);
  if (norm.empty()) throw Error("empty cell");

  if (table_ != nullptr) {
    RowVector sum = RowVector::Zero(cfg_.dimension);
    int known = 0;
    for (auto tok : split_ws(norm)) {
      if (const RowVector* v = table_->find(tok)) {
        sum += *v;
        ++known;
      }
    }
    if (known > 0) {
      sum /= known;
      normalize_or_basis(sum);
      return sum;
    }
  }
  return hashed(norm);
}

ColumnMatrix Embedder::embed_column(std::span<const std::string> cells) const {
  if (cells.empty()) throw Error("column has no cells");
  ColumnMatrix out(static_cast<Eigen::Index>(cells.size()), cfg_.dimension);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    try {
      out.row(static_cast<Eigen::Index>(i)) = embed_cell(cells[i]);
    } catch (const Error& e) {
      throw Error(std::string(e.what()) + " at cell " + std::to_string(i));
    }
  }
  return out;
}

RowVector embed_cell(std::string_view text, const EmbedderConfig& cfg) {
  return Embedder(cfg).embed_cell(text);
}

}  // namespace proxyjoin
