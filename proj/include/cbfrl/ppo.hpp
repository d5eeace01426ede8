#pragma once

#include <span>

#include "cbfrl/policy.hpp"
#include "cbfrl/rollout.hpp"

namespace cbfrl {

struct AdamOptimizer {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long step_count = 0;

  void init(int n);
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);
};

struct PpoGradients {
  Mlp policy;
  Eigen::VectorXd log_std;
  Mlp value;
};

struct LossBreakdown {
  double total = 0.0;
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
};

// Clipped-surrogate PPO loss over the given sample indices of the batch:
// -mean(min(r A, clip(r) A)) + value_coef * 0.5 mean((V - ret)^2)
// - entropy_coef * H. Advantages are read as stored (normalize first).
// When `grads` is non-null, parameter gradients are accumulated into it.
LossBreakdown ppo_loss(const GaussianPolicy& policy, const ValueNet& value,
                       const RolloutBatch& batch, std::span<const int> indices,
                       const PpoConfig& cfg, PpoGradients* grads = nullptr);

struct UpdateStats {
  LossBreakdown pre;
  LossBreakdown post;
  double mean_approx_kl = 0.0;
  double mean_clip_fraction = 0.0;
  double mean_grad_norm = 0.0;
  int minibatches = 0;
};

// Owns the policy/value parameters and a single Adam state over the
// concatenated parameter vector [policy | log_std | value].
class PpoLearner {
 public:
  PpoLearner(GaussianPolicy policy, ValueNet value, const PpoConfig& cfg);

  // Normalizes batch advantages in place (batch mean 0, std 1), then runs
  // cfg.epochs of shuffled minibatch updates with a global gradient-norm cap.
  // Throws std::runtime_error on a non-finite loss or gradient.
  UpdateStats update(RolloutBatch& batch, Rng& rng);

  const GaussianPolicy& policy() const { return policy_; }
  const ValueNet& value() const { return value_; }
  GaussianPolicy& policy() { return policy_; }
  ValueNet& value() { return value_; }
  const PpoConfig& config() const { return cfg_; }

 private:
  GaussianPolicy policy_;
  ValueNet value_;
  PpoConfig cfg_;
  AdamOptimizer opt_;
  int policy_params_ = 0;
  int value_params_ = 0;

  Eigen::VectorXd flatten_params() const;
  void unflatten_params(const Eigen::VectorXd& flat);
  Eigen::VectorXd flatten_grads(const PpoGradients& g) const;
};

}  // namespace cbfrl
