#include "proxyjoin/commands.hpp"

#include "proxyjoin/config.hpp"
#include "proxyjoin/eval.hpp"
#include "proxyjoin/repository.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <random>
#include <unordered_map>

namespace proxyjoin {

namespace {

namespace fs = std::filesystem;

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string work_dir;
};

void add_common(CLI::App* sub, CommonOptions& opts) {
  sub->add_option("--config", opts.config_path, "Flat JSON config file");
  sub->add_option("--set", opts.overrides, "Config override key=value (repeatable)");
  sub->add_option("--work-dir", opts.work_dir, "Directory holding pipeline artifacts");
}

// Built-in defaults, then the config file, then --set, then dedicated flags.
EngineConfig resolve_config(const CommonOptions& opts, const std::function<void(EngineConfig&)>& flags = {}) {
  EngineConfig cfg = opts.config_path.empty() ? EngineConfig{} : load_engine_config(opts.config_path);
  for (const auto& o : opts.overrides) cfg.apply_override(o);
  if (!opts.work_dir.empty()) cfg.work_dir = opts.work_dir;
  if (flags) flags(cfg);
  cfg.train.d = cfg.embedder.dimension;
  cfg.validate();
  return cfg;
}

fs::path require(const EngineConfig& cfg, const char* name, const char* producer) {
  fs::path p = cfg.work_dir / name;
  if (!fs::exists(p)) throw Error("missing " + p.string() + "; run " + producer + " first");
  return p;
}

fs::path output_path(const EngineConfig& cfg, const char* name) {
  fs::create_directories(cfg.work_dir);
  return cfg.work_dir / name;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot write " + p.string());
  return f;
}

std::vector<Column> require_queries(const EngineConfig& cfg) {
  fs::path p = cfg.work_dir / artifact::kQueries;
  if (!fs::exists(p)) throw Error("missing " + p.string() + "; run synth-bench or ingest --queries first");
  return load_columns(p);
}

void run_ingest(const CommonOptions& common, const std::string& tables, const std::string& queries,
                std::ostream& out, std::ostream& err) {
  const EngineConfig cfg = resolve_config(common);
  IngestReport report = ingest_tables(tables);
  for (const auto& e : report.file_errors) err << "warning: " << e << '\n';
  save_repository(report.repository, output_path(cfg, artifact::kRepository));
  out << "ingested " << report.repository.size() << " of " << report.columns_seen << " columns from "
      << report.files_read << " files\n";
  if (!queries.empty()) {
    IngestReport q = ingest_tables(queries);
    for (const auto& e : q.file_errors) err << "warning: " << e << '\n';
    save_columns(q.repository.columns(), output_path(cfg, artifact::kQueries));
    out << "ingested " << q.repository.size() << " query columns\n";
  }
}

void run_synth_bench(const CommonOptions& common, const SynthBenchSpec& spec, std::ostream& out) {
  const EngineConfig cfg = resolve_config(common);
  SynthBenchmark bench = synth_benchmark(spec);
  save_repository(bench.repository, output_path(cfg, artifact::kRepository));
  save_columns(bench.queries, output_path(cfg, artifact::kQueries));
  out << "wrote " << bench.repository.size() << " columns and " << bench.queries.size() << " queries to "
      << cfg.work_dir.string() << '\n';
}

void run_train(const EngineConfig& cfg, std::ostream& out) {
  const Repository repo = load_repository(require(cfg, artifact::kRepository, "ingest or synth-bench"));
  const Embedder embedder(cfg.embedder);
  const EmbeddedColumns cached = embed_repository(repo, embedder);

  std::vector<std::vector<std::string>> cells;
  std::optional<SynthRankingSource> source;
  if (cfg.synth.mode == SynthMode::kText) {
    for (const auto& c : repo.columns()) cells.push_back(c.cells);
    source.emplace(cells, embedder, cfg.train.rank_list_len, cfg.synth, cfg.match);
  } else {
    source.emplace(cached.matrices, cfg.train.rank_list_len, cfg.synth, cfg.match);
  }

  TrainResult result = train(cached.matrices, cfg.train, *source);
  save_checkpoint({result.state.target, result.state.momentum, cfg.train.seed},
                  output_path(cfg, artifact::kCheckpoint));
  auto log = open_out(output_path(cfg, artifact::kTrainLog));
  write_train_log_csv(log, result.log);

  out << "trained " << result.state.step << " steps over " << cached.matrices.size() << " columns";
  if (!result.epoch_mean_loss.empty()) out << "; final epoch loss " << result.epoch_mean_loss.back();
  out << '\n';
  if (source->violations() > 0) out << source->violations() << " ranking lists kept with out-of-order scores\n";
}

void run_embed(const EngineConfig& cfg, std::ostream& out) {
  const Repository repo = load_repository(require(cfg, artifact::kRepository, "ingest or synth-bench"));
  const ProxyCheckpoint ckpt = load_checkpoint(require(cfg, artifact::kCheckpoint, "train"));
  if (ckpt.target.d() != cfg.embedder.dimension) {
    throw Error("checkpoint dimension " + std::to_string(ckpt.target.d()) + " does not match embedder dimension " +
                std::to_string(cfg.embedder.dimension));
  }
  const Embedder embedder(cfg.embedder);
  VectorStore store(static_cast<std::uint32_t>(ckpt.target.l()));
  for (const auto& col : repo.columns()) {
    try {
      store.add(col.id, column_embedding(embedder.embed_column(col.cells), ckpt.target).values);
    } catch (const Error& e) {
      throw Error("column " + col.id + ": " + e.what());
    }
  }
  save_store(store, output_path(cfg, artifact::kStore));
  out << "embedded " << store.size() << " columns into " << store.dimension() << " dimensions\n";
}

void run_build_index(const EngineConfig& cfg, std::ostream& out) {
  const VectorStore store = load_store(require(cfg, artifact::kStore, "embed"));
  HnswIndex index(store, cfg.index);
  index.sync();
  index.save(output_path(cfg, artifact::kIndex));
  out << "indexed " << index.size() << " vectors" << (index.uses_graph() ? "" : " (exact search below threshold)")
      << '\n';
}

struct QueryOptions {
  std::string id;
  std::string csv;
  std::string column;
  std::size_t k = 10;
  bool exact = false;
  bool json = false;
  bool with_oracle = false;
};

Column locate_query(const EngineConfig& cfg, const QueryOptions& q) {
  if (!q.csv.empty()) {
    if (q.column.empty()) throw Error("--csv needs --column");
    std::ifstream in(q.csv, std::ios::binary);
    if (!in) throw IoError("cannot read " + q.csv);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    auto rows = parse_csv(text);
    if (rows.empty()) throw Error(q.csv + " is empty");
    const auto& header = rows.front();
    auto it = std::find(header.begin(), header.end(), q.column);
    if (it == header.end()) throw Error("column " + q.column + " not found in " + q.csv);
    const auto pos = static_cast<std::size_t>(it - header.begin());
    std::vector<std::string> raw;
    for (std::size_t r = 1; r < rows.size(); ++r) {
      if (pos < rows[r].size()) raw.push_back(rows[r][pos]);
    }
    Column col{q.csv + ":" + q.column, q.csv, clean_cells(raw)};
    std::erase(col.cells, std::string{});
    if (col.cells.empty()) throw Error("query column has no non-empty cells");
    return col;
  }
  if (q.id.empty()) throw Error("pass --id or --csv/--column");
  const fs::path qpath = cfg.work_dir / artifact::kQueries;
  if (fs::exists(qpath)) {
    for (auto& c : load_columns(qpath)) {
      if (c.id == q.id) return c;
    }
  }
  const Repository repo = load_repository(require(cfg, artifact::kRepository, "ingest or synth-bench"));
  if (!repo.contains(q.id)) throw Error("unknown query column " + q.id);
  return repo.find(q.id);
}

void run_query(const EngineConfig& cfg, const QueryOptions& q, std::ostream& out) {
  if (q.k == 0) throw Error("k must be positive");
  const ProxyCheckpoint ckpt = load_checkpoint(require(cfg, artifact::kCheckpoint, "train"));
  const VectorStore store = load_store(require(cfg, artifact::kStore, "embed"));
  const Column query = locate_query(cfg, q);
  const Embedder embedder(cfg.embedder);
  const ColumnMatrix qcells = embedder.embed_column(query.cells);
  const Vector qvec = column_embedding(qcells, ckpt.target).values;

  std::vector<Neighbor> hits;
  if (q.exact) {
    hits = knn_exact(store, qvec, q.k);
  } else {
    const HnswIndex index = HnswIndex::load(store, require(cfg, artifact::kIndex, "build-index"));
    hits = index.search(qvec, q.k, std::max<std::size_t>(q.k, static_cast<std::size_t>(cfg.index.ef_search)));
  }

  std::vector<double> joinability;
  if (q.with_oracle) {
    const Repository repo = load_repository(require(cfg, artifact::kRepository, "ingest or synth-bench"));
    for (const auto& h : hits) {
      joinability.push_back(
          proxyjoin::joinability(qcells, embedder.embed_column(repo.find(h.id).cells), cfg.match).value());
    }
  }

  if (q.json) {
    nlohmann::json doc;
    doc["query"] = query.id;
    doc["results"] = nlohmann::json::array();
    for (std::size_t i = 0; i < hits.size(); ++i) {
      nlohmann::json row = {{"rank", i + 1}, {"id", hits[i].id}, {"similarity", hits[i].similarity}};
      if (q.with_oracle) row["joinability"] = joinability[i];
      doc["results"].push_back(row);
    }
    out << doc.dump(2) << '\n';
    return;
  }
  out << "query " << query.id << '\n';
  out << std::left << std::setw(6) << "rank" << std::setw(12) << "similarity";
  if (q.with_oracle) out << std::setw(13) << "joinability";
  out << "column\n";
  out << std::fixed << std::setprecision(6);
  for (std::size_t i = 0; i < hits.size(); ++i) {
    out << std::setw(6) << i + 1 << std::setw(12) << hits[i].similarity;
    if (q.with_oracle) out << std::setw(13) << joinability[i];
    out << hits[i].id << '\n';
  }
  out << std::defaultfloat;
}

void run_oracle(const EngineConfig& cfg, std::size_t k, std::ostream& out) {
  const Repository repo = load_repository(require(cfg, artifact::kRepository, "ingest or synth-bench"));
  const auto queries = require_queries(cfg);
  const Embedder embedder(cfg.embedder);
  const EmbeddedColumns cached = embed_repository(repo, embedder);
  const auto truth = compute_ground_truth(queries, cached, embedder, k, cfg.match);
  auto f = open_out(output_path(cfg, artifact::kGroundTruth));
  write_ground_truth_csv(f, truth);
  out << "wrote top-" << k << " ground truth for " << truth.size() << " queries\n";
}

void run_evaluate(const EngineConfig& cfg, std::vector<std::size_t> ks, bool exact, std::ostream& out) {
  if (ks.empty()) throw Error("need at least one k");
  for (auto k : ks) {
    if (k == 0) throw Error("k must be positive");
  }
  const Repository repo = load_repository(require(cfg, artifact::kRepository, "ingest or synth-bench"));
  const auto queries = require_queries(cfg);
  const ProxyCheckpoint ckpt = load_checkpoint(require(cfg, artifact::kCheckpoint, "train"));
  const VectorStore store = load_store(require(cfg, artifact::kStore, "embed"));
  std::optional<HnswIndex> index;
  if (!exact) index.emplace(HnswIndex::load(store, require(cfg, artifact::kIndex, "build-index")));

  const Embedder embedder(cfg.embedder);
  const EmbeddedColumns cached = embed_repository(repo, embedder);
  std::unordered_map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < cached.ids.size(); ++i) position.emplace(cached.ids[i], i);
  const std::size_t kmax = *std::max_element(ks.begin(), ks.end());

  std::vector<MetricRow> rows;
  for (const auto& query : queries) {
    const ColumnMatrix qcells = embedder.embed_column(query.cells);
    const Vector qvec = column_embedding(qcells, ckpt.target).values;
    const auto hits = exact ? knn_exact(store, qvec, kmax)
                            : index->search(qvec, kmax, std::max<std::size_t>(kmax, cfg.index.ef_search));
    const auto ranked = exact_topk(qcells, cached.matrices, cached.ids, kmax, cfg.match);

    RankedResult approx{query.id, {}};
    RankedResult truth{query.id, {}};
    std::unordered_map<std::string, double> gains;
    for (const auto& r : ranked) {
      truth.entries.emplace_back(r.id, r.score.value());
      gains.emplace(r.id, r.score.value());
    }
    for (const auto& h : hits) {
      approx.entries.emplace_back(h.id, h.similarity);
      if (!gains.contains(h.id)) {
        auto it = position.find(h.id);
        if (it == position.end()) throw Error("store holds unknown column " + h.id + "; rerun embed");
        gains.emplace(h.id, joinability(qcells, cached.matrices[it->second], cfg.match).value());
      }
    }
    for (auto k : ks) rows.push_back({query.id, k, recall_at_k(approx, truth, k), ndcg_at_k(approx, truth, gains, k)});
  }

  auto csv = open_out(output_path(cfg, artifact::kMetrics));
  write_metrics_csv(csv, rows);
  const std::string summary = metrics_summary_json(rows);
  auto js = open_out(output_path(cfg, artifact::kMetricsSummary));
  js << summary << '\n';
  out << summary << '\n';
}

struct BenchOptions {
  std::vector<std::size_t> query_sizes = {64, 128, 256, 512};
  std::vector<std::size_t> store_sizes = {10000, 20000};
  std::size_t queries = 50;
  std::size_t k = 10;
  int runs = 5;
};

Matrix random_unit_rows(std::size_t n, int d, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss;
  Matrix m(static_cast<Eigen::Index>(n), d);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < d; ++j) m(i, j) = gauss(rng);
    m.row(i).normalize();
  }
  return m;
}

void run_bench(const EngineConfig& cfg, const BenchOptions& b, std::ostream& out) {
  std::mt19937_64 rng(cfg.train.seed);
  const fs::path ckpt_path = cfg.work_dir / artifact::kCheckpoint;
  const ProxySet proxies = fs::exists(ckpt_path)
                               ? load_checkpoint(ckpt_path).target
                               : ProxySet::random(cfg.train.l, cfg.train.m, cfg.embedder.dimension, rng);
  std::vector<TimingRow> rows;
  for (auto n : b.query_sizes) {
    const ColumnMatrix col = random_unit_rows(n, proxies.d(), rng);
    const double ms = median_ms([&] { (void)column_embedding(col, proxies); }, b.runs);
    rows.push_back({"encode", n, ms, 0.0});
    out << "encode |C_Q|=" << n << " " << ms << " ms\n";
  }
  for (auto n : b.store_sizes) {
    VectorStore store(static_cast<std::uint32_t>(proxies.l()));
    const Matrix data = random_unit_rows(n, proxies.l(), rng);
    for (std::size_t i = 0; i < n; ++i) store.add("v" + std::to_string(i), Vector(data.row(static_cast<Eigen::Index>(i)).transpose()));
    HnswIndex index(store, cfg.index);
    index.sync();
    const Matrix qs = random_unit_rows(b.queries, proxies.l(), rng);
    const double ms = median_ms(
        [&] {
          for (Eigen::Index i = 0; i < qs.rows(); ++i) (void)index.search(Vector(qs.row(i).transpose()), b.k);
        },
        b.runs);
    const double per_query = ms / static_cast<double>(b.queries);
    rows.push_back({"search", n, 0.0, per_query});
    out << "search |R|=" << n << " " << per_query << " ms/query\n";
  }
  auto csv = open_out(output_path(cfg, artifact::kTiming));
  write_timing_csv(csv, rows);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Joinable column search over learned proxy-column embeddings"};
  app.name("proxyjoin");
  app.require_subcommand(1);

  CommonOptions common;

  auto* ingest = app.add_subcommand("ingest", "Read a directory of CSV tables into the repository");
  std::string tables_dir, queries_dir;
  ingest->add_option("--tables", tables_dir, "Directory of *.csv tables")->required();
  ingest->add_option("--queries", queries_dir, "Directory of query tables");
  add_common(ingest, common);

  auto* synth = app.add_subcommand("synth-bench", "Generate the synthetic benchmark repository and queries");
  SynthBenchSpec spec;
  synth->add_option("--columns", spec.n_columns, "Repository columns");
  synth->add_option("--queries", spec.n_queries, "Query columns");
  synth->add_option("--cells-min", spec.cells_min);
  synth->add_option("--cells-max", spec.cells_max);
  synth->add_option("--domains", spec.domains);
  synth->add_option("--seed", spec.seed);
  add_common(synth, common);

  auto* train_cmd = app.add_subcommand("train", "Learn proxy columns from the repository");
  std::optional<int> epochs, rank_list_len, batch, queue;
  std::optional<std::uint64_t> train_seed;
  train_cmd->add_option("--epochs", epochs);
  train_cmd->add_option("--seed", train_seed);
  train_cmd->add_option("--rank-list-len", rank_list_len, "Positives per anchor (1 = plain InfoNCE)");
  train_cmd->add_option("--batch-size", batch);
  train_cmd->add_option("--queue-len", queue, "Negative queue length in batches");
  add_common(train_cmd, common);

  auto* embed = app.add_subcommand("embed", "Precompute repository column embeddings");
  add_common(embed, common);

  auto* build = app.add_subcommand("build-index", "Build the HNSW index over the stored embeddings");
  add_common(build, common);

  auto* query = app.add_subcommand("query", "Top-k joinable columns for one query column");
  QueryOptions qopts;
  std::optional<double> tau;
  query->add_option("--id", qopts.id, "Query column id (queries file, then repository)");
  query->add_option("--csv", qopts.csv, "CSV file holding the query column");
  query->add_option("--column", qopts.column, "Header name of the query column in --csv");
  query->add_option("--k", qopts.k);
  query->add_flag("--exact", qopts.exact, "Brute-force search instead of the index");
  query->add_flag("--json", qopts.json);
  query->add_flag("--with-oracle", qopts.with_oracle, "Also report true joinability");
  query->add_option("--tau", tau, "Matching threshold for --with-oracle");
  add_common(query, common);

  auto* oracle = app.add_subcommand("oracle", "Exact joinability top-k for every query");
  std::size_t oracle_k = 25;
  oracle->add_option("--k", oracle_k);
  oracle->add_option("--tau", tau);
  add_common(oracle, common);

  auto* evaluate = app.add_subcommand("evaluate", "Recall@k and NDCG@k against the exact oracle");
  std::vector<std::size_t> eval_ks = {5, 15, 25};
  bool eval_exact = false;
  evaluate->add_option("--k", eval_ks, "Cutoffs")->delimiter(',');
  evaluate->add_flag("--exact", eval_exact, "Use brute-force search instead of the index");
  evaluate->add_option("--tau", tau);
  add_common(evaluate, common);

  auto* bench = app.add_subcommand("bench", "Time query encoding and index search");
  BenchOptions bopts;
  bench->add_option("--query-sizes", bopts.query_sizes)->delimiter(',');
  bench->add_option("--store-sizes", bopts.store_sizes)->delimiter(',');
  bench->add_option("--queries", bopts.queries);
  bench->add_option("--runs", bopts.runs);
  add_common(bench, common);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  const auto with_tau = [&](EngineConfig& c) {
    if (tau) c.match.tau = *tau;
  };

  try {
    if (ingest->parsed()) {
      run_ingest(common, tables_dir, queries_dir, out, err);
    } else if (synth->parsed()) {
      spec.validate();
      run_synth_bench(common, spec, out);
    } else if (train_cmd->parsed()) {
      run_train(resolve_config(common,
                               [&](EngineConfig& c) {
                                 if (epochs) c.train.epochs = *epochs;
                                 if (train_seed) c.train.seed = *train_seed;
                                 if (rank_list_len) c.train.rank_list_len = *rank_list_len;
                                 if (batch) c.train.batch_size = *batch;
                                 if (queue) c.train.queue_len = *queue;
                               }),
                out);
    } else if (embed->parsed()) {
      run_embed(resolve_config(common), out);
    } else if (build->parsed()) {
      run_build_index(resolve_config(common), out);
    } else if (query->parsed()) {
      run_query(resolve_config(common, with_tau), qopts, out);
    } else if (oracle->parsed()) {
      run_oracle(resolve_config(common, with_tau), oracle_k, out);
    } else if (evaluate->parsed()) {
      run_evaluate(resolve_config(common, with_tau), eval_ks, eval_exact, out);
    } else if (bench->parsed()) {
      run_bench(resolve_config(common), bopts, out);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace proxyjoin
