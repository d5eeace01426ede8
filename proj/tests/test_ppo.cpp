#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>

#include "cbfrl/ppo.hpp"

using namespace cbfrl;

namespace {

// Random batch with ratios away from 1 so the surrogate is exercised.
RolloutBatch make_batch(int steps, int envs, const GaussianPolicy& policy, Rng& rng,
                        double old_logp_jitter = 0.3) {
  RolloutBatch batch;
  const int obs_dim = policy.mean_net.input_dim();
  batch.allocate(obs_dim, 2, steps, envs);
  for (int i = 0; i < batch.size(); ++i) {
    for (int d = 0; d < obs_dim; ++d) batch.observations(d, i) = uniform(rng, -1.0, 1.0);
  }
  Eigen::MatrixXd mean = policy.mean(batch.observations);
  Eigen::VectorXd sigma = policy.std_dev();
  for (int i = 0; i < batch.size(); ++i) {
    Vec2 noise = normal_pair(rng);
    batch.actions.col(i) = mean.col(i) + sigma.cwiseProduct(noise);
    batch.dones[i] = uniform01(rng) < 0.15 ? 1 : 0;
    batch.rewards(i) = uniform(rng, -1.0, 1.0);
    batch.values(i) = uniform(rng, -1.0, 1.0);
  }
  batch.log_probs = gaussian_log_prob(mean, sigma, batch.actions);
  for (int i = 0; i < batch.size(); ++i)
    batch.log_probs(i) += uniform(rng, -old_logp_jitter, old_logp_jitter);
  for (int e = 0; e < envs; ++e) batch.bootstrap_values(e) = uniform(rng, -1.0, 1.0);
  PpoConfig cfg;
  gae_advantages(batch, cfg);
  return batch;
}

std::vector<int> all_indices(const RolloutBatch& batch) {
  std::vector<int> idx(batch.size());
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

struct FlatParams {
  GaussianPolicy* policy;
  ValueNet* value;

  int size() const {
    return policy->mean_net.param_count() + policy->action_dim() + value->net.param_count();
  }
  Eigen::VectorXd get() const {
    Eigen::VectorXd flat(size());
    const int np = policy->mean_net.param_count();
    policy->mean_net.flatten(flat.head(np));
    flat.segment(np, policy->action_dim()) = policy->log_std;
    value->net.flatten(flat.tail(value->net.param_count()));
    return flat;
  }
  void set(const Eigen::VectorXd& flat) {
    const int np = policy->mean_net.param_count();
    policy->mean_net.unflatten(flat.head(np));
    policy->log_std = flat.segment(np, policy->action_dim());
    value->net.unflatten(flat.tail(value->net.param_count()));
  }
};

}  // namespace

TEST_CASE("gae advantages") {
  PpoConfig cfg;

  SUBCASE("undiscounted reward-to-go when gamma = lambda = 1 and values are zero") {
    RolloutBatch batch;
    batch.allocate(4, 2, 4, 1);
    batch.rewards << 1.0, 2.0, 3.0, 4.0;
    batch.values.setZero();
    batch.dones = {0, 0, 0, 1};
    batch.bootstrap_values.setZero();
    PpoConfig undiscounted = cfg;
    undiscounted.gamma = 1.0;
    undiscounted.gae_lambda = 1.0;
    gae_advantages(batch, undiscounted);
    CHECK(batch.advantages(0) == doctest::Approx(10.0));
    CHECK(batch.advantages(1) == doctest::Approx(9.0));
    CHECK(batch.advantages(2) == doctest::Approx(7.0));
    CHECK(batch.advantages(3) == doctest::Approx(4.0));
  }

  SUBCASE("single-step episode has delta = r - V with no bootstrap") {
    RolloutBatch batch;
    batch.allocate(4, 2, 1, 1);
    batch.rewards(0) = 2.5;
    batch.values(0) = 0.75;
    batch.dones = {1};
    batch.bootstrap_values(0) = 123.0;  // must be masked by the done
    gae_advantages(batch, cfg);
    CHECK(batch.advantages(0) == doctest::Approx(2.5 - 0.75));
    CHECK(batch.returns(0) == doctest::Approx(2.5));
  }

  SUBCASE("matches the brute-force double loop") {
    Rng rng = make_rng(51, 0);
    GaussianPolicy policy = GaussianPolicy::create(4, {8}, 2, 2.0, rng);
    RolloutBatch batch = make_batch(50, 3, policy, rng);

    const int T = batch.num_steps, N = batch.num_envs;
    for (int e = 0; e < N; ++e) {
      for (int k = 0; k < T; ++k) {
        double expected = 0.0;
        double factor = 1.0;
        for (int j = k; j < T; ++j) {
          const int i = batch.index(j, e);
          const double nonterminal = batch.dones[i] ? 0.0 : 1.0;
          const double next_value =
              j + 1 < T ? batch.values(batch.index(j + 1, e)) : batch.bootstrap_values(e);
          const double delta =
              batch.rewards(i) + cfg.gamma * next_value * nonterminal - batch.values(i);
          expected += factor * delta;
          if (batch.dones[i]) break;  // episode boundary
          factor *= cfg.gamma * cfg.gae_lambda;
        }
        CHECK(batch.advantages(batch.index(k, e)) == doctest::Approx(expected).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("ppo loss gradients match central finite differences") {
  Rng rng = make_rng(52, 0);
  GaussianPolicy policy = GaussianPolicy::create(4, {8}, 2, 2.0, rng);
  ValueNet value = ValueNet::create(4, {8}, rng);
  RolloutBatch batch = make_batch(16, 4, policy, rng);
  // normalized advantages, as the update precondition requires
  const double mean = batch.advantages.mean();
  const double sd = std::sqrt((batch.advantages.array() - mean).square().mean());
  batch.advantages = (batch.advantages.array() - mean) / (sd + 1e-8);

  PpoConfig cfg;
  std::vector<int> idx = all_indices(batch);

  PpoGradients grads{policy.mean_net.zeros_like(), Eigen::VectorXd::Zero(2),
                     value.net.zeros_like()};
  ppo_loss(policy, value, batch, idx, cfg, &grads);

  FlatParams params{&policy, &value};
  Eigen::VectorXd theta = params.get();
  Eigen::VectorXd analytic(params.size());
  {
    const int np = policy.mean_net.param_count();
    grads.policy.flatten(analytic.head(np));
    analytic.segment(np, 2) = grads.log_std;
    grads.value.flatten(analytic.tail(value.net.param_count()));
  }

  const double delta = 1e-6;
  Eigen::VectorXd fd(params.size());
  for (int i = 0; i < params.size(); ++i) {
    Eigen::VectorXd t = theta;
    t(i) += delta;
    params.set(t);
    double up = ppo_loss(policy, value, batch, idx, cfg).total;
    t(i) -= 2.0 * delta;
    params.set(t);
    double down = ppo_loss(policy, value, batch, idx, cfg).total;
    fd(i) = (up - down) / (2.0 * delta);
  }
  params.set(theta);

  double rel = (fd - analytic).norm() / (fd.norm() + analytic.norm());
  CHECK(rel <= 1e-4);
  CHECK(analytic.allFinite());
}

TEST_CASE("infinite clip reduces to the vanilla importance-weighted gradient") {
  Rng rng = make_rng(53, 0);
  GaussianPolicy policy = GaussianPolicy::create(4, {8}, 2, 2.0, rng);
  ValueNet value = ValueNet::create(4, {8}, rng);
  RolloutBatch batch = make_batch(16, 2, policy, rng);

  PpoConfig cfg;
  cfg.clip_epsilon = 1e18;
  cfg.value_coef = 0.0;
  cfg.entropy_coef = 0.0;
  std::vector<int> idx = all_indices(batch);

  PpoGradients grads{policy.mean_net.zeros_like(), Eigen::VectorXd::Zero(2),
                     value.net.zeros_like()};
  ppo_loss(policy, value, batch, idx, cfg, &grads);

  // independent vanilla surrogate: -mean(exp(logp - logp_old) A)
  auto vanilla = [&](const GaussianPolicy& p) {
    Eigen::MatrixXd mean = p.mean(batch.observations);
    Eigen::VectorXd logp = gaussian_log_prob(mean, p.std_dev(), batch.actions);
    return -((logp - batch.log_probs).array().exp() * batch.advantages.array()).mean();
  };

  const double delta = 1e-6;
  const int np = policy.mean_net.param_count();
  Eigen::VectorXd analytic(np);
  grads.policy.flatten(analytic);

  Eigen::VectorXd theta(np);
  policy.mean_net.flatten(theta);
  Eigen::VectorXd fd(np);
  for (int i = 0; i < np; ++i) {
    Eigen::VectorXd t = theta;
    t(i) += delta;
    policy.mean_net.unflatten(t);
    double up = vanilla(policy);
    t(i) -= 2.0 * delta;
    policy.mean_net.unflatten(t);
    double down = vanilla(policy);
    fd(i) = (up - down) / (2.0 * delta);
  }
  policy.mean_net.unflatten(theta);

  double rel = (fd - analytic).norm() / (fd.norm() + analytic.norm());
  CHECK(rel <= 1e-4);
}

TEST_CASE("ppo update behavior") {
  Rng rng = make_rng(54, 0);

  SUBCASE("zero advantages leave the policy network untouched") {
    GaussianPolicy policy = GaussianPolicy::create(4, {8}, 2, 2.0, rng);
    ValueNet value = ValueNet::create(4, {8}, rng);
    RolloutBatch batch = make_batch(8, 2, policy, rng);
    batch.advantages.setZero();

    PpoConfig cfg;
    std::vector<int> idx = all_indices(batch);
    PpoGradients grads{policy.mean_net.zeros_like(), Eigen::VectorXd::Zero(2),
                       value.net.zeros_like()};
    ppo_loss(policy, value, batch, idx, cfg, &grads);

    Eigen::VectorXd pg(policy.mean_net.param_count());
    grads.policy.flatten(pg);
    CHECK(pg.cwiseAbs().maxCoeff() == 0.0);
    // the entropy bonus still moves log_std and the value loss the critic
    CHECK(grads.log_std.cwiseAbs().maxCoeff() > 0.0);
    Eigen::VectorXd vg(value.net.param_count());
    grads.value.flatten(vg);
    CHECK(vg.cwiseAbs().maxCoeff() > 0.0);
  }

  SUBCASE("updates are deterministic given params, batch, and seed") {
    Rng ra = make_rng(55, 0);
    GaussianPolicy pa = GaussianPolicy::create(4, {8}, 2, 2.0, ra);
    ValueNet va = ValueNet::create(4, {8}, ra);
    RolloutBatch batch_a = make_batch(16, 2, pa, ra);

    Rng rb = make_rng(55, 0);
    GaussianPolicy pb = GaussianPolicy::create(4, {8}, 2, 2.0, rb);
    ValueNet vb = ValueNet::create(4, {8}, rb);
    RolloutBatch batch_b = make_batch(16, 2, pb, rb);

    PpoConfig cfg;
    cfg.minibatch_size = 8;
    PpoLearner la(pa, va, cfg), lb(pb, vb, cfg);
    Rng sa = make_rng(56, 0), sb = make_rng(56, 0);
    UpdateStats stats_a = la.update(batch_a, sa);
    UpdateStats stats_b = lb.update(batch_b, sb);
    CHECK(stats_a.post.total == stats_b.post.total);

    Eigen::VectorXd fa(la.policy().mean_net.param_count());
    Eigen::VectorXd fb(lb.policy().mean_net.param_count());
    la.policy().mean_net.flatten(fa);
    lb.policy().mean_net.flatten(fb);
    CHECK(fa == fb);
  }

  SUBCASE("a non-finite batch aborts with a diagnostic") {
    GaussianPolicy policy = GaussianPolicy::create(4, {8}, 2, 2.0, rng);
    ValueNet value = ValueNet::create(4, {8}, rng);
    RolloutBatch batch = make_batch(8, 2, policy, rng);
    batch.returns(3) = std::numeric_limits<double>::quiet_NaN();
    PpoConfig cfg;
    PpoLearner learner(policy, value, cfg);
    Rng seed_rng = make_rng(57, 0);
    CHECK_THROWS_AS(learner.update(batch, seed_rng), std::runtime_error);
  }
}
