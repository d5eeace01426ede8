#pragma once

#include "cbfrl/geometry.hpp"
#include "cbfrl/mlp.hpp"

namespace cbfrl {

// Diagonal Gaussian policy. The mean is the network output squashed through
// tanh and scaled per axis to [-v_max, v_max]; the per-dimension log standard
// deviations are learned directly, floored at ln(1e-3).
struct GaussianPolicy {
  Mlp mean_net;             // observation -> action_dim pre-squash outputs
  Eigen::VectorXd log_std;  // action_dim
  double v_max = 2.0;

  static constexpr double kLogStdFloor = -6.907755278982137;  // ln(1e-3)

  static GaussianPolicy create(int obs_dim, const std::vector<int>& hidden, int action_dim,
                               double v_max, Rng& rng);

  int action_dim() const { return static_cast<int>(log_std.size()); }

  // Squashed means for a batch of observations (columns).
  Eigen::MatrixXd mean(const Eigen::MatrixXd& obs) const;
  Eigen::VectorXd std_dev() const { return log_std.array().exp(); }

  void clamp_log_std();
};

struct ActionSample {
  Vec2 action;    // clipped to the v_max ball
  Vec2 raw;       // pre-clip Gaussian sample (stored for the learner)
  double log_prob = 0.0;  // density of `raw` under the pre-clip Gaussian
};

// Single-observation forward returning (mean, std).
std::pair<Vec2, Vec2> policy_forward(const GaussianPolicy& policy, const Eigen::VectorXd& obs);

ActionSample sample_action(const GaussianPolicy& policy, const Eigen::VectorXd& obs, Rng& rng);

// Diagonal Gaussian log density of `action` for the given means (columns).
Eigen::VectorXd gaussian_log_prob(const Eigen::MatrixXd& mean, const Eigen::VectorXd& std_dev,
                                  const Eigen::MatrixXd& actions);

// State-independent entropy of the diagonal Gaussian.
double gaussian_entropy(const Eigen::VectorXd& log_std);

struct ValueNet {
  Mlp net;  // observation -> 1

  static ValueNet create(int obs_dim, const std::vector<int>& hidden, Rng& rng);
  Eigen::VectorXd values(const Eigen::MatrixXd& obs) const;
};

}  // namespace cbfrl
