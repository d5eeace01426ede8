#pragma once

#include <nlohmann/json.hpp>
#include <string>

#include "cbfrl/experiment.hpp"

namespace cbfrl {

using Json = nlohmann::json;

// Full nested run configuration. Every field is optional in the file and
// defaults to the values below; unknown keys are rejected. Parsing then
// re-serializing yields a canonical form (all fields present, sorted keys).
struct RunConfig {
  EnvConfig env;
  PpoConfig ppo;
  FilterParams filter{1.0, 0.05};
  struct Run {
    int num_envs = 256;
    int iterations = 1500;
    int steps_per_iteration = 24;
    std::uint64_t seed = 1;
    int eval_episodes = 1000;
  } train;
  VariantConfig variant{TrainingMode::Dual, false, false, "Dual (w/o rt. filt.)"};

  TrainConfig train_config() const;

  Json to_json() const;
  static RunConfig from_json(const Json& j);
};

// Canonical Table-style label for a method configuration.
std::string variant_label(TrainingMode mode, bool runtime_filter, bool dr);

// FNV-1a 64-bit hash of the canonical serialization, as fixed-width hex.
std::string config_hash(const Json& canonical);
inline std::string config_hash(const RunConfig& cfg) { return config_hash(cfg.to_json()); }

// WorldSpec <-> config file representation.
Json world_to_json(const WorldSpec& world);
WorldSpec world_from_json(const Json& j);

}  // namespace cbfrl
