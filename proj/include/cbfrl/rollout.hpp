#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace cbfrl {

struct PpoConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_epsilon = 0.2;
  double learning_rate = 3e-4;
  int epochs = 4;
  int minibatch_size = 4096;
  double entropy_coef = 0.005;
  double value_coef = 0.5;
  double grad_norm_cap = 1.0;
  std::vector<int> hidden = {64, 64};

  void validate() const;
};

// Flat per-step storage for T steps of N parallel environments, indexed
// (t, e) -> t*N + e. Samples are matrix columns.
struct RolloutBatch {
  int num_steps = 0;
  int num_envs = 0;
  Eigen::MatrixXd observations;  // obs_dim x (T*N)
  Eigen::MatrixXd actions;       // action_dim x (T*N), pre-clip samples
  Eigen::VectorXd log_probs;     // T*N
  Eigen::VectorXd values;        // T*N
  Eigen::VectorXd rewards;       // T*N
  std::vector<std::uint8_t> dones;   // T*N, 1 if the episode ended at this step
  Eigen::VectorXd bootstrap_values;  // N, value of the state after the last step

  Eigen::VectorXd advantages;  // filled by gae_advantages
  Eigen::VectorXd returns;     // advantages + values

  int size() const { return num_steps * num_envs; }
  int index(int t, int e) const { return t * num_envs + e; }
  void allocate(int obs_dim, int action_dim, int steps, int envs);
};

// GAE within episode boundaries: advantage_k = sum_i (gamma*lambda)^i
// delta_{k+i}, with dones cutting both the bootstrap and the trace.
// returns = advantages + values.
void gae_advantages(RolloutBatch& batch, const PpoConfig& cfg);

}  // namespace cbfrl
