#include "proxyjoin/repository.hpp"

#include "json.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

namespace proxyjoin {

namespace {

constexpr std::size_t kMinDistinctCells = 5;  // columns need strictly more

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failure: " + path.string());
  return ss.str();
}

std::string random_word(std::mt19937_64& rng, int min_len, int max_len) {
  std::uniform_int_distribution<int> len(min_len, max_len);
  std::uniform_int_distribution<int> letter(0, 25);
  std::string w(static_cast<std::size_t>(len(rng)), 'a');
  for (auto& c : w) c = static_cast<char>('a' + letter(rng));
  return w;
}

std::string table_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "t%05zu", i);
  return buf;
}

nlohmann::json column_to_json(const Column& c) {
  return {{"id", c.id}, {"table", c.table_id}, {"cell_count", c.cells.size()}, {"cells", c.cells}};
}

Column column_from_json(const nlohmann::json& j) {
  Column c;
  c.id = j.at("id").get<std::string>();
  c.table_id = j.at("table").get<std::string>();
  c.cells = j.at("cells").get<std::vector<std::string>>();
  if (c.cells.empty()) throw Error("column " + c.id + " has no cells");
  return c;
}

}  // namespace

const Column& Repository::find(const std::string& id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) throw Error("unknown column id: " + id);
  return columns_[it->second];
}

void Repository::add_columns(std::vector<Column> added) {
  std::unordered_set<std::string> fresh;
  for (const auto& c : added) {
    if (by_id_.contains(c.id) || !fresh.insert(c.id).second) throw Error("duplicate column id: " + c.id);
    if (c.cells.empty()) throw Error("column " + c.id + " has no cells");
  }
  for (auto& c : added) {
    by_id_.emplace(c.id, columns_.size());
    columns_.push_back(std::move(c));
  }
}

std::vector<std::string> Repository::ids() const {
  std::vector<std::string> out;
  out.reserve(columns_.size());
  for (const auto& c : columns_) out.push_back(c.id);
  return out;
}

void EmbeddedColumns::sync(const Repository& repo, const Embedder& embedder) {
  for (std::size_t i = matrices.size(); i < repo.size(); ++i) {
    ids.push_back(repo.at(i).id);
    matrices.push_back(embedder.embed_column(repo.at(i).cells));
  }
}

EmbeddedColumns embed_repository(const Repository& repo, const Embedder& embedder) {
  EmbeddedColumns e;
  e.sync(repo, embedder);
  return e;
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t i = 0;
  if (text.substr(0, 3) == "\xEF\xBB\xBF") i = 3;  // UTF-8 BOM

  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    if (!(row.size() == 1 && row[0].empty())) rows.push_back(std::move(row));
    row.clear();
  };

  for (; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field_started) {
          in_quotes = true;
          field_started = true;
        } else {
          field.push_back(c);
        }
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
        end_row();
        break;
      case '\n':
        end_row();
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (in_quotes) throw Error("unterminated quoted field");
  if (field_started || !field.empty() || !row.empty()) end_row();
  return rows;
}

bool is_numeric_cell(std::string_view cell) {
  std::string s;
  for (char c : cell) {
    if (c != ',') s.push_back(c);
  }
  std::size_t i = 0;
  if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
  bool digits = false, dot = false;
  for (; i < s.size(); ++i) {
    if (std::isdigit(static_cast<unsigned char>(s[i]))) {
      digits = true;
    } else if (s[i] == '.' && !dot) {
      dot = true;
    } else {
      return false;
    }
  }
  return digits;
}

std::vector<std::string> clean_cells(std::span<const std::string> raw) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& r : raw) {
    std::string c = normalize_cell(r);
    if (c.empty()) continue;
    if (seen.insert(c).second) out.push_back(std::move(c));
  }
  return out;
}

bool keep_column(std::span<const std::string> cleaned) {
  if (cleaned.size() <= kMinDistinctCells) return false;
  const auto numeric = std::count_if(cleaned.begin(), cleaned.end(),
                                     [](const std::string& c) { return is_numeric_cell(c); });
  return static_cast<std::size_t>(numeric) * 2 <= cleaned.size();
}

std::vector<Column> columns_from_csv(std::string_view text, const std::string& table_id) {
  const auto rows = parse_csv(text);
  if (rows.empty()) throw Error("no header row");
  const auto& header = rows[0];
  std::vector<Column> out;
  std::unordered_set<std::string> names;
  for (std::size_t c = 0; c < header.size(); ++c) {
    std::vector<std::string> raw;
    for (std::size_t r = 1; r < rows.size(); ++r) {
      if (c < rows[r].size()) raw.push_back(rows[r][c]);
    }
    auto cells = clean_cells(raw);
    std::string name = normalize_cell(header[c]);
    if (name.empty() || !names.insert(name).second) name = "#" + std::to_string(c);
    names.insert(name);
    Column col{table_id + ":" + name, table_id, std::move(cells)};
    out.push_back(std::move(col));
  }
  return out;
}

IngestReport ingest_tables(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());

  IngestReport report;
  std::vector<Column> kept;
  std::unordered_set<std::string> tables;
  for (const auto& f : files) {
    try {
      std::string table = std::filesystem::relative(f, dir).replace_extension().generic_string();
      if (!tables.insert(table).second) throw Error("duplicate table id " + table);
      auto cols = columns_from_csv(read_file(f), table);
      ++report.files_read;
      for (auto& c : cols) {
        ++report.columns_seen;
        if (keep_column(c.cells)) kept.push_back(std::move(c));
      }
    } catch (const Error& e) {
      report.file_errors.push_back(f.string() + ": " + e.what());
    }
  }
  if (kept.empty()) throw Error("no column survived ingestion filtering in " + dir.string());
  report.repository.add_columns(std::move(kept));
  return report;
}

void save_columns(std::span<const Column> cols, const std::filesystem::path& path) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : cols) arr.push_back(column_to_json(c));
  nlohmann::json doc = {{"column_count", cols.size()}, {"columns", arr}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump(1) << '\n';
  if (!out) throw IoError("write failure: " + path.string());
}

std::vector<Column> load_columns(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::vector<Column> out;
  try {
    const auto doc = nlohmann::json::parse(text);
    for (const auto& j : doc.at("columns")) out.push_back(column_from_json(j));
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed column file " + path.string() + ": " + e.what());
  }
  return out;
}

void save_repository(const Repository& repo, const std::filesystem::path& path) {
  save_columns(repo.columns(), path);
}

Repository load_repository(const std::filesystem::path& path) {
  Repository repo;
  repo.add_columns(load_columns(path));
  return repo;
}

void SynthBenchSpec::validate() const {
  if (n_queries == 0) throw Error("synth benchmark needs at least one query");
  if (cells_min < 1 || cells_min > cells_max) throw Error("invalid cells_per_column range");
  if (levels.empty()) throw Error("synth benchmark needs at least one planted level");
  for (double l : levels) {
    if (!(l >= 0.0 && l <= 1.0)) throw Error("planted levels must lie in [0,1]");
  }
  if (n_queries * levels.size() > n_columns) throw Error("n_columns is smaller than the planted columns");
  // A planted column draws up to cells_max fresh tokens outside the query's.
  if (vocabulary < 2 * cells_max + 1) throw Error("vocabulary too small to guarantee disjoint fresh cells");
}

SynthBenchmark synth_benchmark(const SynthBenchSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);

  std::vector<std::string> tags;
  for (std::size_t d = 0; d < spec.domains; ++d) tags.push_back(random_word(rng, 9, 12));
  std::vector<std::string> vocab;
  {
    std::unordered_set<std::string> seen;
    while (vocab.size() < spec.vocabulary) {
      auto w = random_word(rng, 5, 8);
      if (seen.insert(w).second) vocab.push_back(std::move(w));
    }
  }
  std::uniform_int_distribution<std::size_t> size_dist(spec.cells_min, spec.cells_max);
  std::uniform_int_distribution<std::size_t> domain_dist(0, std::max<std::size_t>(spec.domains, 1) - 1);

  auto draw_cores = [&](std::size_t n, const std::unordered_set<std::size_t>& exclude) {
    std::unordered_set<std::size_t> chosen;
    std::vector<std::size_t> out;
    std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
    while (out.size() < n) {
      const auto w = pick(rng);
      if (exclude.contains(w) || !chosen.insert(w).second) continue;
      out.push_back(w);
    }
    return out;
  };
  auto cell = [&](std::size_t core, std::size_t domain) {
    return tags.empty() ? vocab[core] : vocab[core] + " " + tags[domain];
  };

  SynthBenchmark bench;
  std::vector<std::vector<std::size_t>> query_cores;
  std::vector<std::size_t> query_domain;
  for (std::size_t q = 0; q < spec.n_queries; ++q) {
    const std::size_t dom = spec.domains == 0 ? 0 : q % spec.domains;
    auto cores = draw_cores(size_dist(rng), {});
    Column col;
    col.table_id = "q" + std::to_string(q);
    col.id = col.table_id + ":query";
    for (auto c : cores) col.cells.push_back(cell(c, dom));
    bench.queries.push_back(std::move(col));
    query_cores.push_back(std::move(cores));
    query_domain.push_back(dom);
  }

  std::vector<std::vector<std::string>> repo_cells;
  for (std::size_t q = 0; q < spec.n_queries; ++q) {
    const auto& qc = query_cores[q];
    const std::unordered_set<std::size_t> exclude(qc.begin(), qc.end());
    for (double level : spec.levels) {
      const auto shared = std::min<std::size_t>(
          qc.size(), static_cast<std::size_t>(std::ceil(level * static_cast<double>(qc.size()) - 1e-9)));
      std::vector<std::size_t> picked = qc;
      std::shuffle(picked.begin(), picked.end(), rng);
      picked.resize(shared);
      const std::size_t total = std::max(shared, size_dist(rng));
      auto fresh = draw_cores(total - shared, exclude);
      picked.insert(picked.end(), fresh.begin(), fresh.end());
      std::shuffle(picked.begin(), picked.end(), rng);
      std::vector<std::string> cells;
      for (auto c : picked) cells.push_back(cell(c, query_domain[q]));
      repo_cells.push_back(std::move(cells));
    }
  }
  while (repo_cells.size() < spec.n_columns) {
    const std::size_t dom = domain_dist(rng);
    std::vector<std::string> cells;
    for (auto c : draw_cores(size_dist(rng), {})) cells.push_back(cell(c, dom));
    repo_cells.push_back(std::move(cells));
  }

  // Random table numbering so id order carries no planting information.
  std::vector<std::size_t> table_no(repo_cells.size());
  std::iota(table_no.begin(), table_no.end(), std::size_t{0});
  std::shuffle(table_no.begin(), table_no.end(), rng);
  std::vector<Column> cols(repo_cells.size());
  for (std::size_t i = 0; i < repo_cells.size(); ++i) {
    auto& c = cols[table_no[i]];
    c.table_id = table_name(table_no[i]);
    c.id = c.table_id + ":value";
    c.cells = std::move(repo_cells[i]);
  }
  bench.repository.add_columns(std::move(cols));
  return bench;
}

std::vector<GroundTruth> compute_ground_truth(std::span<const Column> queries, const EmbeddedColumns& repo,
                                              const Embedder& embedder, std::size_t k,
                                              const MatchConfig& match) {
  std::vector<GroundTruth> out;
  for (const auto& q : queries) {
    const ColumnMatrix qm = embedder.embed_column(q.cells);
    out.push_back({q.id, exact_topk(qm, repo.matrices, repo.ids, k, match)});
  }
  return out;
}

void write_ground_truth_csv(std::ostream& out, std::span<const GroundTruth> truth) {
  write_oracle_csv_header(out);
  for (const auto& t : truth) write_oracle_csv_rows(out, t.query_id, t.ranked);
}

}  // namespace proxyjoin
