#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace proxyjoin {

// Artifact file names inside the work directory.
namespace artifact {
inline constexpr const char* kRepository = "repository.json";
inline constexpr const char* kQueries = "queries.json";
inline constexpr const char* kCheckpoint = "proxies.snpx";
inline constexpr const char* kTrainLog = "train_log.csv";
inline constexpr const char* kStore = "store.snpy";
inline constexpr const char* kIndex = "index.snpi";
inline constexpr const char* kGroundTruth = "ground_truth.csv";
inline constexpr const char* kMetrics = "metrics.csv";
inline constexpr const char* kMetricsSummary = "metrics_summary.json";
inline constexpr const char* kTiming = "timing.csv";
}  // namespace artifact

// Runs one subcommand. `args` excludes the program name. Returns the process
// exit code; diagnostics go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace proxyjoin
