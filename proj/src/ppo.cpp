#include "cbfrl/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace cbfrl {

void AdamOptimizer::init(int n) {
  m = Eigen::VectorXd::Zero(n);
  v = Eigen::VectorXd::Zero(n);
  step_count = 0;
}

void AdamOptimizer::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  ++step_count;
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
  params.array() -=
      learning_rate * (m.array() / bc1) / ((v.array() / bc2).sqrt() + epsilon);
}

LossBreakdown ppo_loss(const GaussianPolicy& policy, const ValueNet& value,
                       const RolloutBatch& batch, std::span<const int> indices,
                       const PpoConfig& cfg, PpoGradients* grads) {
  const int M = static_cast<int>(indices.size());
  if (M == 0) throw std::invalid_argument("ppo_loss: empty minibatch");
  const int obs_dim = static_cast<int>(batch.observations.rows());
  const int act_dim = static_cast<int>(batch.actions.rows());

  Eigen::MatrixXd obs(obs_dim, M);
  Eigen::MatrixXd actions(act_dim, M);
  Eigen::VectorXd old_log_probs(M), advantages(M), returns(M);
  for (int s = 0; s < M; ++s) {
    const int i = indices[s];
    obs.col(s) = batch.observations.col(i);
    actions.col(s) = batch.actions.col(i);
    old_log_probs(s) = batch.log_probs(i);
    advantages(s) = batch.advantages(i);
    returns(s) = batch.returns(i);
  }

  Mlp::Cache policy_cache, value_cache;
  Eigen::MatrixXd pre_squash = policy.mean_net.forward_cached(obs, policy_cache);
  Eigen::MatrixXd squash = pre_squash.array().tanh();
  Eigen::MatrixXd mean = policy.v_max * squash;
  Eigen::VectorXd sigma = policy.std_dev();

  Eigen::MatrixXd z(act_dim, M);
  Eigen::VectorXd log_probs = Eigen::VectorXd::Zero(M);
  constexpr double kLog2Pi = 1.8378770664093453;
  for (int i = 0; i < act_dim; ++i) {
    z.row(i) = (actions.row(i) - mean.row(i)) / sigma(i);
    log_probs.array() +=
        -0.5 * z.row(i).array().square().transpose() - policy.log_std(i) - 0.5 * kLog2Pi;
  }

  Eigen::ArrayXd log_ratio = (log_probs - old_log_probs).array();
  Eigen::ArrayXd ratio = log_ratio.exp();
  Eigen::ArrayXd adv = advantages.array();
  Eigen::ArrayXd clipped = ratio.min(1.0 + cfg.clip_epsilon).max(1.0 - cfg.clip_epsilon);
  Eigen::ArrayXd surr_unclipped = ratio * adv;
  Eigen::ArrayXd surr_clipped = clipped * adv;

  LossBreakdown out;
  out.policy = -surr_unclipped.min(surr_clipped).mean();
  out.approx_kl = (ratio - 1.0 - log_ratio).mean();
  out.clip_fraction = ((ratio - 1.0).abs() > cfg.clip_epsilon).cast<double>().mean();

  Eigen::VectorXd values = value.net.forward_cached(obs, value_cache).row(0).transpose();
  Eigen::VectorXd value_err = values - returns;
  out.value = 0.5 * value_err.squaredNorm() / M;

  out.entropy = gaussian_entropy(policy.log_std);
  out.total = out.policy + cfg.value_coef * out.value - cfg.entropy_coef * out.entropy;

  if (grads != nullptr) {
    // d loss / d log_prob per sample, following the branch min() selected
    Eigen::ArrayXd dmin_dratio(M);
    for (int s = 0; s < M; ++s) {
      if (surr_unclipped(s) <= surr_clipped(s)) {
        dmin_dratio(s) = adv(s);
      } else {
        const bool interior = ratio(s) > 1.0 - cfg.clip_epsilon && ratio(s) < 1.0 + cfg.clip_epsilon;
        dmin_dratio(s) = interior ? adv(s) : 0.0;
      }
    }
    Eigen::ArrayXd dloss_dlogp = -(dmin_dratio * ratio) / M;

    // through mean: dlogp/dmu_i = z_i / sigma_i, mu = v_max tanh(y)
    Eigen::MatrixXd dmean(act_dim, M);
    for (int i = 0; i < act_dim; ++i) {
      dmean.row(i) = dloss_dlogp.transpose() * z.row(i).array() / sigma(i);
    }
    Eigen::MatrixXd dy =
        (dmean.array() * (policy.v_max * (1.0 - squash.array().square()))).matrix();
    policy.mean_net.backward(policy_cache, dy, grads->policy);

    // log_std: dlogp/dlog_sigma_i = z_i^2 - 1, plus the entropy bonus
    for (int i = 0; i < act_dim; ++i) {
      grads->log_std(i) +=
          (dloss_dlogp * (z.row(i).array().square().transpose() - 1.0)).sum() - cfg.entropy_coef;
    }

    Eigen::MatrixXd dvalue = (cfg.value_coef / M) * value_err.transpose();
    value.net.backward(value_cache, dvalue, grads->value);
  }
  return out;
}

PpoLearner::PpoLearner(GaussianPolicy policy, ValueNet value, const PpoConfig& cfg)
    : policy_(std::move(policy)), value_(std::move(value)), cfg_(cfg) {
  cfg_.validate();
  policy_params_ = policy_.mean_net.param_count();
  value_params_ = value_.net.param_count();
  opt_.learning_rate = cfg_.learning_rate;
  opt_.init(policy_params_ + policy_.action_dim() + value_params_);
}

Eigen::VectorXd PpoLearner::flatten_params() const {
  Eigen::VectorXd flat(policy_params_ + policy_.action_dim() + value_params_);
  policy_.mean_net.flatten(flat.head(policy_params_));
  flat.segment(policy_params_, policy_.action_dim()) = policy_.log_std;
  value_.net.flatten(flat.tail(value_params_));
  return flat;
}

void PpoLearner::unflatten_params(const Eigen::VectorXd& flat) {
  policy_.mean_net.unflatten(flat.head(policy_params_));
  policy_.log_std = flat.segment(policy_params_, policy_.action_dim());
  policy_.clamp_log_std();
  value_.net.unflatten(flat.tail(value_params_));
}

Eigen::VectorXd PpoLearner::flatten_grads(const PpoGradients& g) const {
  Eigen::VectorXd flat(policy_params_ + policy_.action_dim() + value_params_);
  g.policy.flatten(flat.head(policy_params_));
  flat.segment(policy_params_, policy_.action_dim()) = g.log_std;
  g.value.flatten(flat.tail(value_params_));
  return flat;
}

UpdateStats PpoLearner::update(RolloutBatch& batch, Rng& rng) {
  const int n = batch.size();
  if (n == 0) throw std::invalid_argument("PpoLearner::update: empty batch");

  // batch-level advantage normalization
  const double mean = batch.advantages.mean();
  const double var = (batch.advantages.array() - mean).square().sum() / n;
  batch.advantages = (batch.advantages.array() - mean) / (std::sqrt(var) + 1e-8);

  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);

  UpdateStats stats;
  stats.pre = ppo_loss(policy_, value_, batch, all, cfg_);

  std::vector<int> order = all;
  for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (int start = 0; start < n; start += cfg_.minibatch_size) {
      const int count = std::min(cfg_.minibatch_size, n - start);
      std::span<const int> idx(order.data() + start, static_cast<std::size_t>(count));

      PpoGradients grads{policy_.mean_net.zeros_like(),
                         Eigen::VectorXd::Zero(policy_.action_dim()), value_.net.zeros_like()};
      LossBreakdown loss = ppo_loss(policy_, value_, batch, idx, cfg_, &grads);
      if (!std::isfinite(loss.total)) {
        std::ostringstream msg;
        msg << "PpoLearner::update: non-finite loss (policy=" << loss.policy
            << ", value=" << loss.value << ", entropy=" << loss.entropy << ")";
        throw std::runtime_error(msg.str());
      }

      Eigen::VectorXd grad = flatten_grads(grads);
      if (!grad.allFinite()) throw std::runtime_error("PpoLearner::update: non-finite gradient");
      const double norm = grad.norm();
      if (norm > cfg_.grad_norm_cap) grad *= cfg_.grad_norm_cap / norm;

      Eigen::VectorXd params = flatten_params();
      opt_.step(params, grad);
      unflatten_params(params);

      stats.mean_approx_kl += loss.approx_kl;
      stats.mean_clip_fraction += loss.clip_fraction;
      stats.mean_grad_norm += norm;
      ++stats.minibatches;
    }
  }
  if (stats.minibatches > 0) {
    stats.mean_approx_kl /= stats.minibatches;
    stats.mean_clip_fraction /= stats.minibatches;
    stats.mean_grad_norm /= stats.minibatches;
  }
  stats.post = ppo_loss(policy_, value_, batch, all, cfg_);
  return stats;
}

}  // namespace cbfrl
