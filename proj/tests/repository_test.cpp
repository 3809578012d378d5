#include "proxyjoin/repository.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

using namespace proxyjoin;
using testing_support::TempDir;

namespace {

void write_file(const std::filesystem::path& p, const std::string& body) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << body;
}

std::string city_table() {
  return "city,population,note\n"
         "Paris,2100000,a\nLyon,500000,a\nNice,340000,a\n"
         "Lille,230000,a\nNantes,300000,a\nBrest,140000,a\nLyon,500000,a\n";
}

}  // namespace

TEST(ParseCsv, QuotingRules) {
  const auto rows = parse_csv("a,\"b,c\",\"say \"\"hi\"\"\"\r\n\"multi\nline\",,x\n");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"a", "b,c", "say \"hi\""}));
  EXPECT_EQ(rows[1], (std::vector<std::string>{"multi\nline", "", "x"}));
}

TEST(ParseCsv, BomAndMissingFinalNewline) {
  const auto rows = parse_csv("\xEF\xBB\xBFh1,h2\n1,2");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0][0], "h1");
  EXPECT_EQ(rows[1][1], "2");
  EXPECT_THROW(parse_csv("\"open"), Error);
}

TEST(NumericCells, Classifier) {
  for (const char* s : {"12", "-3.5", "+7", "1,234,567", "0.25", "3."}) EXPECT_TRUE(is_numeric_cell(s)) << s;
  for (const char* s : {"", "-", "1.2.3", "12a", "abc", "1e5", "."}) EXPECT_FALSE(is_numeric_cell(s)) << s;
}

TEST(KeepColumn, NeedsMoreThanFiveDistinctNonNumericCells) {
  const std::vector<std::string> five = {"a", "b", "c", "d", "e"};
  EXPECT_FALSE(keep_column(five));
  const std::vector<std::string> six = {"a", "b", "c", "d", "e", "f"};
  EXPECT_TRUE(keep_column(six));
  const std::vector<std::string> numbers = {"1", "2", "3", "4", "5", "6", "7"};
  EXPECT_FALSE(keep_column(numbers));
  const std::vector<std::string> half = {"1", "2", "3", "d", "e", "f"};
  EXPECT_TRUE(keep_column(half));
}

TEST(CleanCells, DeduplicatesAfterNormalizing) {
  const std::vector<std::string> raw = {"a", " a ", "b", "b", "c  d", "c d", "", "e", "f", "g"};
  const auto cells = clean_cells(raw);
  EXPECT_EQ(cells, (std::vector<std::string>{"a", "b", "c d", "e", "f", "g"}));
  const std::vector<std::string> ten = {"p", "q", "r", "s", "t", "u", "v", "p", "q", "r"};
  EXPECT_EQ(clean_cells(ten).size(), 7u);
}

TEST(ColumnsFromCsv, NamesColumnsAndFillsBlankHeaders) {
  const auto cols = columns_from_csv("name,,name\nx,y,z\n", "tbl");
  ASSERT_EQ(cols.size(), 3u);
  EXPECT_EQ(cols[0].id, "tbl:name");
  EXPECT_EQ(cols[1].id, "tbl:#1");
  EXPECT_EQ(cols[2].id, "tbl:#2");
  EXPECT_EQ(cols[0].table_id, "tbl");
}

TEST(Ingest, FiltersColumnsAndReportsBadFiles) {
  TempDir dir("ingest");
  write_file(dir.path() / "b/cities.csv", city_table());
  write_file(dir.path() / "a.csv", "word\nalpha\nbeta\ngamma\ndelta\nepsilon\nzeta\n");
  write_file(dir.path() / "broken.csv", "h\n\"never closed\n");
  write_file(dir.path() / "notes.txt", "ignored");
  const auto report = ingest_tables(dir.path());
  EXPECT_EQ(report.files_read, 2u);
  EXPECT_EQ(report.columns_seen, 4u);
  ASSERT_EQ(report.file_errors.size(), 1u);
  EXPECT_NE(report.file_errors[0].find("broken.csv"), std::string::npos);
  EXPECT_EQ(report.repository.ids(), (std::vector<std::string>{"a:word", "b/cities:city"}));
  EXPECT_EQ(report.repository.find("b/cities:city").cells.size(), 6u);
}

TEST(Ingest, IsIdempotent) {
  TempDir dir("ingest");
  write_file(dir.path() / "cities.csv", city_table());
  TempDir out("ingest_out");
  save_repository(ingest_tables(dir.path()).repository, out.path() / "r1.json");
  save_repository(ingest_tables(dir.path()).repository, out.path() / "r2.json");
  std::ifstream a(out.path() / "r1.json"), b(out.path() / "r2.json");
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  EXPECT_EQ(sa.str(), sb.str());
}

TEST(Ingest, FailsWhenNothingSurvives) {
  TempDir dir("ingest");
  write_file(dir.path() / "tiny.csv", "h\na\nb\n");
  EXPECT_THROW(ingest_tables(dir.path()), Error);
  EXPECT_THROW(ingest_tables(dir.path() / "missing"), Error);
}

TEST(Repository, AddColumnsIsAtomicOnDuplicates) {
  Repository repo;
  repo.add_columns({{"t:a", "t", {"x"}}});
  EXPECT_THROW(repo.add_columns({{"t:b", "t", {"y"}}, {"t:a", "t", {"z"}}}), Error);
  EXPECT_EQ(repo.size(), 1u);
  EXPECT_THROW(repo.add_columns({{"t:c", "t", {"y"}}, {"t:c", "t", {"z"}}}), Error);
  repo.add_columns({{"t:b", "t", {"y"}}});
  EXPECT_EQ(repo.size(), 2u);
  EXPECT_TRUE(repo.contains("t:b"));
  EXPECT_THROW(repo.find("t:q"), Error);
}

TEST(EmbeddedColumns, SyncOnlyEmbedsNewColumns) {
  Repository repo;
  repo.add_columns({{"t:a", "t", {"x", "y"}}});
  const Embedder emb(EmbedderConfig{});
  EmbeddedColumns cached = embed_repository(repo, emb);
  const ColumnMatrix before = cached.matrices[0];
  const double* address = cached.matrices[0].data();
  repo.add_columns({{"t:b", "t", {"z"}}});
  cached.sync(repo, emb);
  ASSERT_EQ(cached.matrices.size(), 2u);
  EXPECT_EQ(cached.matrices[0].data(), address);
  EXPECT_TRUE(cached.matrices[0] == before);
  EXPECT_EQ(cached.ids[1], "t:b");
}

TEST(RepositoryFile, RoundTripsWithManifestFields) {
  TempDir dir("repo");
  Repository repo;
  repo.add_columns({{"t:a", "t", {"x", "y z"}}, {"u:b", "u", {"\"q\""}}});
  save_repository(repo, dir.path() / "r.json");
  const Repository back = load_repository(dir.path() / "r.json");
  EXPECT_EQ(back.ids(), repo.ids());
  EXPECT_EQ(back.find("t:a").cells, repo.find("t:a").cells);
  std::ifstream in(dir.path() / "r.json");
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_NE(ss.str().find("\"cell_count\": 2"), std::string::npos);
  write_file(dir.path() / "bad.json", "{\"columns\": 3}");
  EXPECT_THROW(load_repository(dir.path() / "bad.json"), Error);
}

TEST(SynthBenchmark, DeterministicForSeed) {
  SynthBenchSpec spec;
  spec.n_columns = 120;
  spec.n_queries = 5;
  const auto a = synth_benchmark(spec);
  const auto b = synth_benchmark(spec);
  EXPECT_EQ(a.repository.ids(), b.repository.ids());
  for (std::size_t i = 0; i < a.repository.size(); ++i) EXPECT_EQ(a.repository.at(i).cells, b.repository.at(i).cells);
  spec.seed = 2;
  EXPECT_NE(synth_benchmark(spec).queries[0].cells, a.queries[0].cells);
}

TEST(SynthBenchmark, PlantedLevelsMatchEquiJoinOracle) {
  SynthBenchSpec spec;
  spec.n_columns = 200;
  spec.n_queries = 6;
  const auto bench = synth_benchmark(spec);
  const Embedder emb(EmbedderConfig{});
  const auto cached = embed_repository(bench.repository, emb);
  const auto truth = compute_ground_truth(bench.queries, cached, emb, spec.levels.size(), MatchConfig{0.0});
  ASSERT_EQ(truth.size(), 6u);
  for (std::size_t q = 0; q < truth.size(); ++q) {
    const double n = static_cast<double>(bench.queries[q].cells.size());
    ASSERT_EQ(truth[q].ranked.size(), spec.levels.size());
    for (std::size_t i = 0; i < spec.levels.size(); ++i) {
      EXPECT_LE(std::abs(truth[q].ranked[i].score.value() - spec.levels[i]), 1.0 / n + 1e-12);
    }
  }
}

TEST(SynthBenchmark, ValidatesSpec) {
  SynthBenchSpec spec;
  spec.vocabulary = 10;
  EXPECT_THROW(synth_benchmark(spec), Error);
  spec = {};
  spec.levels = {1.5};
  EXPECT_THROW(spec.validate(), Error);
  spec = {};
  spec.n_columns = 10;
  EXPECT_THROW(spec.validate(), Error);
}

TEST(GroundTruthCsv, OneBlockPerQuery) {
  std::vector<GroundTruth> truth = {{"q1", {{"t:a", {2, 4}}}}, {"q2", {{"t:b", {1, 4}}}}};
  std::ostringstream out;
  write_ground_truth_csv(out, truth);
  EXPECT_EQ(out.str(), "query_id,rank,column_id,matched,query_size,value\nq1,1,t:a,2,4,0.5\nq2,1,t:b,1,4,0.25\n");
}
