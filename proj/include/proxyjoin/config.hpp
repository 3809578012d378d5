#pragma once

#include "proxyjoin/datagen.hpp"
#include "proxyjoin/embedder.hpp"
#include "proxyjoin/index.hpp"
#include "proxyjoin/matching.hpp"
#include "proxyjoin/training.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace proxyjoin {

// Every tunable of the pipeline. Defaults follow the published settings
// where one exists (tau 0.2, t 0.08, l 90, m 50, s 3, lr 0.01, batch 64,
// queue 32, momentum 0.9999).
struct EngineConfig {
  EmbedderConfig embedder;
  MatchConfig match;
  TrainConfig train;
  AnnIndexConfig index;
  SynthConfig synth;
  std::filesystem::path work_dir = ".";

  // Applies one "key" = JSON value assignment; unknown keys throw.
  void set(std::string_view key, const std::string& json_value);
  // "key=value" where value is JSON, or a bare string for string keys.
  void apply_override(std::string_view assignment);
  void validate() const;

  std::string to_json() const;
  static std::vector<std::string> keys();
};

// Reads a flat JSON object. Unknown keys throw; missing keys keep defaults.
EngineConfig load_engine_config(const std::filesystem::path& path);

}  // namespace proxyjoin
