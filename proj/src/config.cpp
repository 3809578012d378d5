#include "proxyjoin/config.hpp"

#include "json.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace proxyjoin {

namespace {

using Json = nlohmann::json;

struct Field {
  std::function<void(EngineConfig&, const Json&)> set;
  std::function<Json(const EngineConfig&)> get;
};

template <typename T>
Field member(T EngineConfig::*section, auto member_ptr) {
  return {[=](EngineConfig& c, const Json& j) {
            using V = std::remove_reference_t<decltype((c.*section).*member_ptr)>;
            (c.*section).*member_ptr = j.get<V>();
          },
          [=](const EngineConfig& c) { return Json((c.*section).*member_ptr); }};
}

const std::map<std::string, Field, std::less<>>& registry() {
  static const std::map<std::string, Field, std::less<>> fields = [] {
    std::map<std::string, Field, std::less<>> f;
    f["embedder.kind"] = {
        [](EngineConfig& c, const Json& j) {
          const auto s = j.get<std::string>();
          if (s == "hashed-ngram") {
            c.embedder.kind = EmbedderKind::kHashedNgram;
          } else if (s == "word-vector-file") {
            c.embedder.kind = EmbedderKind::kWordVectorFile;
          } else {
            throw Error("embedder.kind must be hashed-ngram or word-vector-file");
          }
        },
        [](const EngineConfig& c) {
          return Json(c.embedder.kind == EmbedderKind::kHashedNgram ? "hashed-ngram" : "word-vector-file");
        }};
    f["embedder.dimension"] = member(&EngineConfig::embedder, &EmbedderConfig::dimension);
    f["embedder.ngram_min"] = member(&EngineConfig::embedder, &EmbedderConfig::ngram_min);
    f["embedder.ngram_max"] = member(&EngineConfig::embedder, &EmbedderConfig::ngram_max);
    f["embedder.vector_file"] = {
        [](EngineConfig& c, const Json& j) { c.embedder.vector_file_path = j.get<std::string>(); },
        [](const EngineConfig& c) { return Json(c.embedder.vector_file_path.string()); }};
    f["embedder.seed"] = member(&EngineConfig::embedder, &EmbedderConfig::seed);
    f["match.tau"] = member(&EngineConfig::match, &MatchConfig::tau);
    f["train.temperature"] = member(&EngineConfig::train, &TrainConfig::temperature);
    f["train.momentum"] = member(&EngineConfig::train, &TrainConfig::momentum_alpha);
    f["train.queue_len"] = member(&EngineConfig::train, &TrainConfig::queue_len);
    f["train.batch_size"] = member(&EngineConfig::train, &TrainConfig::batch_size);
    f["train.rank_list_len"] = member(&EngineConfig::train, &TrainConfig::rank_list_len);
    f["train.learning_rate"] = member(&EngineConfig::train, &TrainConfig::learning_rate);
    f["train.epochs"] = member(&EngineConfig::train, &TrainConfig::epochs);
    f["train.seed"] = member(&EngineConfig::train, &TrainConfig::seed);
    f["train.l"] = member(&EngineConfig::train, &TrainConfig::l);
    f["train.m"] = member(&EngineConfig::train, &TrainConfig::m);
    f["train.adam_beta1"] = member(&EngineConfig::train, &TrainConfig::adam_beta1);
    f["train.adam_beta2"] = member(&EngineConfig::train, &TrainConfig::adam_beta2);
    f["train.adam_epsilon"] = member(&EngineConfig::train, &TrainConfig::adam_epsilon);
    f["index.max_neighbors"] = member(&EngineConfig::index, &AnnIndexConfig::max_neighbors);
    f["index.ef_construction"] = member(&EngineConfig::index, &AnnIndexConfig::ef_construction);
    f["index.ef_search"] = member(&EngineConfig::index, &AnnIndexConfig::ef_search);
    f["index.exact_fallback_threshold"] = member(&EngineConfig::index, &AnnIndexConfig::exact_fallback_threshold);
    f["index.seed"] = member(&EngineConfig::index, &AnnIndexConfig::seed);
    f["synth.split_ratio"] = member(&EngineConfig::synth, &SynthConfig::split_ratio);
    f["synth.score_min"] = member(&EngineConfig::synth, &SynthConfig::score_min);
    f["synth.score_max"] = member(&EngineConfig::synth, &SynthConfig::score_max);
    f["synth.sigma"] = member(&EngineConfig::synth, &SynthConfig::sigma);
    f["synth.gamma"] = member(&EngineConfig::synth, &SynthConfig::gamma);
    f["synth.max_shrink"] = member(&EngineConfig::synth, &SynthConfig::max_shrink);
    f["synth.augment"] = member(&EngineConfig::synth, &SynthConfig::augment);
    f["synth.mode"] = {
        [](EngineConfig& c, const Json& j) {
          const auto s = j.get<std::string>();
          if (s == "embedding") {
            c.synth.mode = SynthMode::kEmbedding;
          } else if (s == "text") {
            c.synth.mode = SynthMode::kText;
          } else {
            throw Error("synth.mode must be embedding or text");
          }
        },
        [](const EngineConfig& c) { return Json(c.synth.mode == SynthMode::kText ? "text" : "embedding"); }};
    f["paths.work_dir"] = {[](EngineConfig& c, const Json& j) { c.work_dir = j.get<std::string>(); },
                           [](const EngineConfig& c) { return Json(c.work_dir.string()); }};
    return f;
  }();
  return fields;
}

void set_json(EngineConfig& cfg, std::string_view key, const Json& value) {
  const auto& reg = registry();
  auto it = reg.find(key);
  if (it == reg.end()) throw Error("unknown config key: " + std::string(key));
  try {
    it->second.set(cfg, value);
  } catch (const Json::exception& e) {
    throw Error("bad value for " + std::string(key) + ": " + e.what());
  }
}

}  // namespace

void EngineConfig::set(std::string_view key, const std::string& json_value) {
  Json value;
  try {
    value = Json::parse(json_value);
  } catch (const Json::exception&) {
    // Bare words are accepted as strings ("embedder.kind=hashed-ngram").
    value = json_value;
  }
  set_json(*this, key, value);
}

void EngineConfig::apply_override(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw Error("override must look like key=value: " + std::string(assignment));
  set(assignment.substr(0, eq), std::string(assignment.substr(eq + 1)));
}

void EngineConfig::validate() const {
  embedder.validate();
  match.validate();
  train.validate();
  index.validate();
  synth.validate();
}

std::string EngineConfig::to_json() const {
  Json doc = Json::object();
  for (const auto& [key, field] : registry()) doc[key] = field.get(*this);
  return doc.dump(2);
}

std::vector<std::string> EngineConfig::keys() {
  std::vector<std::string> out;
  for (const auto& [key, field] : registry()) out.push_back(key);
  return out;
}

EngineConfig load_engine_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config: " + path.string());
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error("malformed config " + path.string() + ": " + e.what());
  }
  if (!doc.is_object()) throw Error("config must be a flat JSON object");
  EngineConfig cfg;
  for (const auto& [key, value] : doc.items()) {
    if (value.is_object() || value.is_array()) throw Error("config must be flat; nested value at " + key);
    set_json(cfg, key, value);
  }
  return cfg;
}

}  // namespace proxyjoin
