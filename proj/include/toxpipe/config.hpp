#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "toxpipe/classifier.hpp"
#include "toxpipe/common.hpp"
#include "toxpipe/corpus.hpp"
#include "toxpipe/llm_client.hpp"
#include "toxpipe/triage.hpp"

namespace toxpipe {

struct PipelineConfig {
  std::string input_path;
  std::string output_dir;
  std::string model_path;
  TriagePolicy triage;
  TrainConfig train;
  EndpointConfig endpoint;
  SplitFractions split;
  // Seed for corpus-level sampling (balance, split); training has its own.
  std::uint64_t data_seed = 0;
  bool strict = true;
  // Tolerated fraction of per-record failures before a command exits nonzero.
  double fail_ceiling = 0.01;
  std::string templates_dir;
  // Stamped into provenance verbatim; the empty default keeps rerun
  // artifacts byte-identical.
  std::string timestamp;
  int verbosity = 1;

  void check_valid() const {
    triage.check_valid();
    train.check_valid();
    if (!endpoint.base_url.empty()) endpoint.check_valid();
    split.check_valid();
    if (!(fail_ceiling >= 0.0 && fail_ceiling <= 1.0))
      throw std::invalid_argument("PipelineConfig: fail_ceiling must be in [0, 1]");
  }
};

// Plain (key-sorted) json, so the dump used for hashing is canonical.
inline nlohmann::json to_json(const PipelineConfig& c) {
  nlohmann::json j;
  j["input"] = c.input_path;
  j["output_dir"] = c.output_dir;
  j["model"] = c.model_path;
  j["triage"] = {
      {"no_tox_max_total", c.triage.no_tox_max_total},
      {"no_tox_max_single", c.triage.no_tox_max_single},
      {"mild_min_total", c.triage.mild_min_total},
      {"mild_max_total", c.triage.mild_max_total},
      {"toxic_min_total", c.triage.toxic_min_total},
  };
  j["train"] = {
      {"max_epochs", c.train.max_epochs},
      {"learning_rate", c.train.learning_rate},
      {"batch_size", c.train.batch_size},
      {"seed", c.train.seed},
      {"weight_update_source", std::string(to_string(c.train.weight_update_source))},
      {"weight_floor", c.train.weight_floor},
      {"max_text_length", c.train.max_text_length},
      {"feature_dim", c.train.feature_dim},
      {"dynamic_weights", c.train.dynamic_weights},
  };
  j["split"] = {
      {"train", c.split.train},
      {"validation", c.split.validation},
      {"test", c.split.test},
  };
  j["endpoint"] = {
      {"base_url", c.endpoint.base_url},
      {"model", c.endpoint.model},
      {"auth_env", c.endpoint.auth_env},
      {"max_in_flight", c.endpoint.max_in_flight},
      {"timeout_ms", c.endpoint.timeout_ms},
      {"retry_budget", c.endpoint.retry_budget},
      {"language", c.endpoint.language},
      {"temperature", c.endpoint.temperature},
      {"backoff_base_ms", c.endpoint.backoff_base_ms},
  };
  j["data_seed"] = c.data_seed;
  j["strict"] = c.strict;
  j["fail_ceiling"] = c.fail_ceiling;
  j["templates_dir"] = c.templates_dir;
  j["timestamp"] = c.timestamp;
  j["verbosity"] = c.verbosity;
  return j;
}

inline std::string config_hash(const PipelineConfig& c) {
  return to_hex(fnv1a64(to_json(c).dump()));
}

namespace detail {

template <typename T>
void maybe_set(const nlohmann::json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

}  // namespace detail

// Applies the keys present in `j` onto `config`, leaving everything else
// untouched. Unknown keys are rejected: a typoed config key silently doing
// nothing is worse than an error.
inline void apply_json_overrides(PipelineConfig& config, const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");
  static const std::set<std::string> kKnown = {
      "input",  "output_dir", "model",        "triage",       "train",
      "split",  "endpoint",   "data_seed",    "strict",       "fail_ceiling",
      "templates_dir", "timestamp", "verbosity"};
  for (const auto& [key, value] : j.items()) {
    if (!kKnown.count(key))
      throw std::invalid_argument("config: unknown key '" + key + "'");
  }
  detail::maybe_set(j, "input", config.input_path);
  detail::maybe_set(j, "output_dir", config.output_dir);
  detail::maybe_set(j, "model", config.model_path);
  if (auto it = j.find("triage"); it != j.end()) {
    detail::maybe_set(*it, "no_tox_max_total", config.triage.no_tox_max_total);
    detail::maybe_set(*it, "no_tox_max_single", config.triage.no_tox_max_single);
    detail::maybe_set(*it, "mild_min_total", config.triage.mild_min_total);
    detail::maybe_set(*it, "mild_max_total", config.triage.mild_max_total);
    detail::maybe_set(*it, "toxic_min_total", config.triage.toxic_min_total);
  }
  if (auto it = j.find("train"); it != j.end()) {
    detail::maybe_set(*it, "max_epochs", config.train.max_epochs);
    detail::maybe_set(*it, "learning_rate", config.train.learning_rate);
    detail::maybe_set(*it, "batch_size", config.train.batch_size);
    detail::maybe_set(*it, "seed", config.train.seed);
    if (auto src = it->find("weight_update_source"); src != it->end()) {
      const std::string s = src->get<std::string>();
      if (s == "train_epoch")
        config.train.weight_update_source = WeightUpdateSource::kTrainEpoch;
      else if (s == "validation")
        config.train.weight_update_source = WeightUpdateSource::kValidation;
      else
        throw std::invalid_argument("config: unknown weight_update_source '" + s + "'");
    }
    detail::maybe_set(*it, "weight_floor", config.train.weight_floor);
    detail::maybe_set(*it, "max_text_length", config.train.max_text_length);
    detail::maybe_set(*it, "feature_dim", config.train.feature_dim);
    detail::maybe_set(*it, "dynamic_weights", config.train.dynamic_weights);
  }
  if (auto it = j.find("split"); it != j.end()) {
    detail::maybe_set(*it, "train", config.split.train);
    detail::maybe_set(*it, "validation", config.split.validation);
    detail::maybe_set(*it, "test", config.split.test);
  }
  if (auto it = j.find("endpoint"); it != j.end()) {
    detail::maybe_set(*it, "base_url", config.endpoint.base_url);
    detail::maybe_set(*it, "model", config.endpoint.model);
    detail::maybe_set(*it, "auth_env", config.endpoint.auth_env);
    detail::maybe_set(*it, "max_in_flight", config.endpoint.max_in_flight);
    detail::maybe_set(*it, "timeout_ms", config.endpoint.timeout_ms);
    detail::maybe_set(*it, "retry_budget", config.endpoint.retry_budget);
    detail::maybe_set(*it, "language", config.endpoint.language);
    detail::maybe_set(*it, "temperature", config.endpoint.temperature);
    detail::maybe_set(*it, "backoff_base_ms", config.endpoint.backoff_base_ms);
  }
  detail::maybe_set(j, "data_seed", config.data_seed);
  detail::maybe_set(j, "strict", config.strict);
  detail::maybe_set(j, "fail_ceiling", config.fail_ceiling);
  detail::maybe_set(j, "templates_dir", config.templates_dir);
  detail::maybe_set(j, "timestamp", config.timestamp);
  detail::maybe_set(j, "verbosity", config.verbosity);
}

inline PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("config file " + path + ": " + e.what());
  }
  PipelineConfig config;
  apply_json_overrides(config, j);
  return config;
}

}  // namespace toxpipe
