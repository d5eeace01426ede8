#include "cbfrl/policy.hpp"

#include <cmath>
#include <stdexcept>

namespace cbfrl {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;  // ln(2*pi)

std::vector<int> full_sizes(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> sizes;
  sizes.push_back(in);
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}
}  // namespace

GaussianPolicy GaussianPolicy::create(int obs_dim, const std::vector<int>& hidden, int action_dim,
                                      double v_max, Rng& rng) {
  GaussianPolicy p;
  p.mean_net = Mlp::create(full_sizes(obs_dim, hidden, action_dim), rng, 0.01);
  p.log_std = Eigen::VectorXd::Constant(action_dim, std::log(0.5 * v_max));
  p.v_max = v_max;
  p.clamp_log_std();
  return p;
}

Eigen::MatrixXd GaussianPolicy::mean(const Eigen::MatrixXd& obs) const {
  return v_max * mean_net.forward(obs).array().tanh();
}

void GaussianPolicy::clamp_log_std() {
  log_std = log_std.cwiseMax(kLogStdFloor);
}

std::pair<Vec2, Vec2> policy_forward(const GaussianPolicy& policy, const Eigen::VectorXd& obs) {
  if (obs.size() != policy.mean_net.input_dim())
    throw std::invalid_argument("policy_forward: observation dim mismatch");
  Eigen::MatrixXd m = policy.mean(obs);
  return {Vec2(m(0, 0), m(1, 0)), Vec2(policy.std_dev()(0), policy.std_dev()(1))};
}

ActionSample sample_action(const GaussianPolicy& policy, const Eigen::VectorXd& obs, Rng& rng) {
  auto [mu, sigma] = policy_forward(policy, obs);
  Vec2 noise = normal_pair(rng);
  ActionSample s;
  s.raw = mu + sigma.cwiseProduct(noise);
  s.action = clip_to_ball(s.raw, policy.v_max);
  double lp = 0.0;
  for (int i = 0; i < 2; ++i) {
    double z = (s.raw(i) - mu(i)) / sigma(i);
    lp += -0.5 * z * z - std::log(sigma(i)) - 0.5 * kLog2Pi;
  }
  s.log_prob = lp;
  return s;
}

Eigen::VectorXd gaussian_log_prob(const Eigen::MatrixXd& mean, const Eigen::VectorXd& std_dev,
                                  const Eigen::MatrixXd& actions) {
  const Eigen::Index n = mean.cols();
  Eigen::VectorXd lp = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < mean.rows(); ++i) {
    Eigen::ArrayXd z = (actions.row(i) - mean.row(i)).array() / std_dev(i);
    lp.array() += -0.5 * z.square() - std::log(std_dev(i)) - 0.5 * kLog2Pi;
  }
  return lp;
}

double gaussian_entropy(const Eigen::VectorXd& log_std) {
  return log_std.sum() + 0.5 * log_std.size() * (1.0 + kLog2Pi);
}

ValueNet ValueNet::create(int obs_dim, const std::vector<int>& hidden, Rng& rng) {
  ValueNet v;
  v.net = Mlp::create(full_sizes(obs_dim, hidden, 1), rng, 1.0);
  return v;
}

Eigen::VectorXd ValueNet::values(const Eigen::MatrixXd& obs) const {
  return net.forward(obs).row(0).transpose();
}

}  // namespace cbfrl
