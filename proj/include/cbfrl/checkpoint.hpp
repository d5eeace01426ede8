#pragma once

#include <nlohmann/json.hpp>
#include <string>

#include "cbfrl/policy.hpp"

namespace cbfrl {

// Self-describing textual checkpoint: layer shapes, parameters, log_std,
// the embedded run configuration and its hash, and the training step.
struct Checkpoint {
  GaussianPolicy policy;
  ValueNet value;
  nlohmann::json config;  // canonical run config
  std::string config_hash;
  long train_step = 0;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace cbfrl
