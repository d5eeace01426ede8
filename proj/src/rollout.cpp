#include "cbfrl/rollout.hpp"

#include <stdexcept>

namespace cbfrl {

void PpoConfig::validate() const {
  if (gamma <= 0.0 || gamma > 1.0) throw std::invalid_argument("PpoConfig: gamma must be in (0,1]");
  if (gae_lambda <= 0.0 || gae_lambda > 1.0)
    throw std::invalid_argument("PpoConfig: gae_lambda must be in (0,1]");
  if (clip_epsilon <= 0.0) throw std::invalid_argument("PpoConfig: clip_epsilon must be > 0");
  if (learning_rate <= 0.0) throw std::invalid_argument("PpoConfig: learning_rate must be > 0");
  if (epochs <= 0) throw std::invalid_argument("PpoConfig: epochs must be > 0");
  if (minibatch_size <= 0) throw std::invalid_argument("PpoConfig: minibatch_size must be > 0");
  if (grad_norm_cap <= 0.0) throw std::invalid_argument("PpoConfig: grad_norm_cap must be > 0");
  if (hidden.empty()) throw std::invalid_argument("PpoConfig: need at least one hidden layer");
}

void RolloutBatch::allocate(int obs_dim, int action_dim, int steps, int envs) {
  num_steps = steps;
  num_envs = envs;
  const int n = steps * envs;
  observations.resize(obs_dim, n);
  actions.resize(action_dim, n);
  log_probs.resize(n);
  values.resize(n);
  rewards.resize(n);
  dones.assign(n, 0);
  bootstrap_values = Eigen::VectorXd::Zero(envs);
  advantages.resize(n);
  returns.resize(n);
}

void gae_advantages(RolloutBatch& batch, const PpoConfig& cfg) {
  if (batch.values.size() != batch.size() || batch.rewards.size() != batch.size())
    throw std::invalid_argument("gae_advantages: values and rewards must be populated");
  const int T = batch.num_steps;
  const int N = batch.num_envs;
  batch.advantages.resize(batch.size());
  for (int e = 0; e < N; ++e) {
    double acc = 0.0;
    for (int t = T - 1; t >= 0; --t) {
      const int i = batch.index(t, e);
      const double nonterminal = batch.dones[i] ? 0.0 : 1.0;
      const double next_value =
          t + 1 < T ? batch.values(batch.index(t + 1, e)) : batch.bootstrap_values(e);
      const double delta =
          batch.rewards(i) + cfg.gamma * next_value * nonterminal - batch.values(i);
      acc = delta + cfg.gamma * cfg.gae_lambda * nonterminal * acc;
      batch.advantages(i) = acc;
    }
  }
  batch.returns = batch.advantages + batch.values;
}

}  // namespace cbfrl
