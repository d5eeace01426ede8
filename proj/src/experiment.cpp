#include "cbfrl/experiment.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace cbfrl {

namespace {
constexpr std::uint64_t kPolicyInitStream = 0x11417u;
constexpr std::uint64_t kSampleStream = 0x5a3bu;
constexpr std::uint64_t kShuffleStream = 0x6c0deu;
constexpr std::uint64_t kTrainEpisodeStream = 0x7121a117u;
constexpr std::uint64_t kEvalEpisodeStream = 0xe7a1u;
constexpr std::uint64_t kAblationStream = 0xab1au;
}  // namespace

const char* to_string(TrainingMode mode) {
  switch (mode) {
    case TrainingMode::Nominal: return "nominal";
    case TrainingMode::RewardOnly: return "reward_only";
    case TrainingMode::FilterOnly: return "filter_only";
    case TrainingMode::Dual: return "dual";
  }
  return "?";
}

TrainingMode training_mode_from_string(const std::string& s) {
  if (s == "nominal") return TrainingMode::Nominal;
  if (s == "reward_only") return TrainingMode::RewardOnly;
  if (s == "filter_only") return TrainingMode::FilterOnly;
  if (s == "dual") return TrainingMode::Dual;
  throw std::invalid_argument("unknown training mode: " + s);
}

std::vector<VariantConfig> table_variants() {
  std::vector<VariantConfig> rows;
  for (bool dr : {false, true}) {
    auto add = [&](TrainingMode mode, bool rt, std::string label) {
      if (dr) label += " DR";
      rows.push_back({mode, rt, dr, std::move(label)});
    };
    add(TrainingMode::Nominal, false, "Nominal");
    add(TrainingMode::Dual, true, "Dual");
    add(TrainingMode::Dual, false, "Dual (w/o rt. filt.)");
    add(TrainingMode::RewardOnly, false, "Reward Only");
    add(TrainingMode::FilterOnly, true, "Filter Only");
    add(TrainingMode::FilterOnly, false, "Filter Only (w/o rt. filt.)");
  }
  return rows;
}

void TrainConfig::validate() const {
  if (num_envs < 1) throw std::invalid_argument("TrainConfig: num_envs must be >= 1");
  if (num_iterations < 1) throw std::invalid_argument("TrainConfig: num_iterations must be >= 1");
  if (steps_per_iteration < 1)
    throw std::invalid_argument("TrainConfig: steps_per_iteration must be >= 1");
  if (eval_episodes < 1) throw std::invalid_argument("TrainConfig: eval_episodes must be >= 1");
  env.validate();
  ppo.validate();
  if (filter.alpha <= 0.0 || filter.dt <= 0.0)
    throw std::invalid_argument("TrainConfig: filter alpha and dt must be > 0");
}

namespace {

struct EpisodeTracker {
  double return_acc = 0.0;
  int length = 0;
  double min_h = std::numeric_limits<double>::infinity();

  void reset() { *this = EpisodeTracker{}; }
};

}  // namespace

TrainResult train_variant(const VariantConfig& variant, const TrainConfig& cfg,
                          const IterationCallback& on_iteration) {
  cfg.validate();
  const EnvConfig& env_cfg = cfg.env;
  const int N = cfg.num_envs;
  const int T = cfg.steps_per_iteration;
  const int obs_dim = observation_dim(env_cfg);

  Rng init_rng = make_rng(cfg.seed, kPolicyInitStream);
  GaussianPolicy policy = GaussianPolicy::create(obs_dim, cfg.ppo.hidden, 2, env_cfg.v_max, init_rng);
  ValueNet value = ValueNet::create(obs_dim, cfg.ppo.hidden, init_rng);
  PpoLearner learner(std::move(policy), std::move(value), cfg.ppo);

  Rng sample_rng = make_rng(cfg.seed, kSampleStream);
  Rng shuffle_rng = make_rng(cfg.seed, kShuffleStream);

  EnvConfig run_env = env_cfg;
  run_env.dr_enabled = variant.dr;

  std::vector<EnvState> states(N);
  std::vector<EpisodeTracker> trackers(N);
  std::vector<std::uint64_t> episode_counter(N, 0);
  auto fresh_state = [&](int e) {
    return reset(run_env, derive_seed(cfg.seed, kTrainEpisodeStream + e, episode_counter[e]++));
  };
  for (int e = 0; e < N; ++e) states[e] = fresh_state(e);

  RolloutBatch batch;
  TrainResult result;
  result.seed = cfg.seed;
  result.variant = variant;

  Eigen::MatrixXd obs(obs_dim, N);

  for (int iter = 0; iter < cfg.num_iterations; ++iter) {
    batch.allocate(obs_dim, 2, T, N);
    IterationMetrics metrics;
    metrics.iteration = iter;
    double reward_sum = 0.0;
    double cbf_reward_sum = 0.0;
    long activated = 0;
    double ep_return_sum = 0.0, ep_length_sum = 0.0, ep_min_h_sum = 0.0;

    for (int t = 0; t < T; ++t) {
      for (int e = 0; e < N; ++e) obs.col(e) = observe(states[e], run_env);

      Eigen::MatrixXd pre_squash = learner.policy().mean_net.forward(obs);
      Eigen::MatrixXd mean = learner.policy().v_max * pre_squash.array().tanh();
      Eigen::VectorXd sigma = learner.policy().std_dev();
      Eigen::VectorXd values = learner.value().values(obs);

      for (int e = 0; e < N; ++e) {
        const int i = batch.index(t, e);
        Vec2 mu = mean.col(e);
        Vec2 noise = normal_pair(sample_rng);
        Vec2 raw = mu + sigma.cwiseProduct(noise);
        double log_prob = 0.0;
        for (int d = 0; d < 2; ++d) {
          double z = (raw(d) - mu(d)) / sigma(d);
          log_prob += -0.5 * z * z - learner.policy().log_std(d) - 0.5 * 1.8378770664093453;
        }
        Vec2 v_policy = clip_to_ball(raw, run_env.v_max);

        Vec2 v_safe = v_policy;
        if (variant.computes_filter()) {
          BarrierEval eval = eval_composite(states[e].world, states[e].q);
          FilterOutcome fo = filter_action(eval, cfg.filter, v_policy);
          v_safe = fo.v_safe;
          if (fo.activated) ++activated;
        }
        Vec2 v_exec = variant.train_applies_filter() ? v_safe : v_policy;

        StepOutcome out =
            step(states[e], v_exec, v_policy, v_safe, run_env, variant.train_applies_reward());

        batch.observations.col(i) = obs.col(e);
        batch.actions.col(i) = raw;
        batch.log_probs(i) = log_prob;
        batch.values(i) = values(e);
        batch.rewards(i) = out.total_reward;
        batch.dones[i] = out.terminal != TerminalCause::None ? 1 : 0;

        reward_sum += out.total_reward;
        cbf_reward_sum += out.reward_components.cbf;
        EpisodeTracker& tracker = trackers[e];
        tracker.return_acc += out.total_reward;
        tracker.length += 1;
        tracker.min_h = std::min(tracker.min_h, out.eval_after.value);

        switch (out.terminal) {
          case TerminalCause::GoalReached: ++metrics.goals; break;
          case TerminalCause::ObstacleCollision: ++metrics.obstacle_collisions; break;
          case TerminalCause::WallCollision: ++metrics.wall_collisions; break;
          case TerminalCause::Timeout: ++metrics.timeouts; break;
          case TerminalCause::None: break;
        }
        if (out.terminal != TerminalCause::None) {
          ++metrics.episodes;
          ep_return_sum += tracker.return_acc;
          ep_length_sum += tracker.length;
          ep_min_h_sum += tracker.min_h;
          tracker.reset();
          states[e] = fresh_state(e);
        } else {
          states[e] = out.next_state;
        }
      }
    }

    for (int e = 0; e < N; ++e) obs.col(e) = observe(states[e], run_env);
    batch.bootstrap_values = learner.value().values(obs);
    gae_advantages(batch, cfg.ppo);
    UpdateStats stats = learner.update(batch, shuffle_rng);

    metrics.mean_step_reward = reward_sum / batch.size();
    metrics.mean_cbf_reward = cbf_reward_sum / batch.size();
    metrics.filter_activation_rate = static_cast<double>(activated) / batch.size();
    if (metrics.episodes > 0) {
      metrics.mean_episode_return = ep_return_sum / metrics.episodes;
      metrics.mean_episode_length = ep_length_sum / metrics.episodes;
      metrics.mean_min_h = ep_min_h_sum / metrics.episodes;
    }
    metrics.policy_loss = stats.post.policy;
    metrics.value_loss = stats.post.value;
    metrics.entropy = stats.post.entropy;
    metrics.approx_kl = stats.mean_approx_kl;

    if (!std::isfinite(metrics.mean_step_reward))
      throw std::runtime_error("train_variant: non-finite training statistics at iteration " +
                               std::to_string(iter));

    result.curves.total_obstacle_collisions += metrics.obstacle_collisions;
    result.curves.total_wall_collisions += metrics.wall_collisions;
    result.curves.total_goals += metrics.goals;
    result.curves.total_timeouts += metrics.timeouts;
    result.curves.total_episodes += metrics.episodes;
    result.curves.iterations.push_back(metrics);
    if (on_iteration) on_iteration(metrics);
  }

  result.policy = learner.policy();
  result.value = learner.value();
  return result;
}

EvalReport evaluate_policy(const PolicyFn& policy_fn, const EnvConfig& env_cfg,
                           const FilterParams& filter, int n_episodes, bool runtime_filter,
                           bool dr, std::uint64_t seed, const StepLogger& logger) {
  if (n_episodes < 1) throw std::invalid_argument("evaluate_policy: n_episodes must be >= 1");
  EnvConfig run_env = env_cfg;
  run_env.dr_enabled = dr;

  EvalReport report;
  report.n_episodes = n_episodes;
  long goals = 0, obstacle_hits = 0, wall_hits = 0, timeouts = 0;
  long total_steps = 0, activated = 0;
  double length_sum = 0.0, min_h_sum = 0.0;

  for (int ep = 0; ep < n_episodes; ++ep) {
    EnvState state = reset(run_env, derive_seed(seed, kEvalEpisodeStream, ep));
    double min_h = eval_composite(state.world, state.q).value;
    TerminalCause terminal = TerminalCause::None;
    int steps = 0;
    while (terminal == TerminalCause::None) {
      Eigen::VectorXd obs = observe(state, run_env);
      Vec2 v_policy = clip_to_ball(policy_fn(state, obs), run_env.v_max);
      Vec2 v_exec = v_policy;
      Vec2 v_safe = v_policy;
      if (runtime_filter) {
        BarrierEval eval = eval_composite(state.world, state.q);
        FilterOutcome fo = filter_action(eval, filter, v_policy);
        v_safe = fo.v_safe;
        v_exec = fo.v_safe;
        if (fo.activated) ++activated;
      }
      StepOutcome out = step(state, v_exec, v_policy, v_safe, run_env, false);
      min_h = std::min(min_h, out.eval_after.value);
      terminal = out.terminal;
      ++steps;
      ++total_steps;
      if (logger) {
        logger(StepRecord{ep, steps - 1, state.q, v_policy, v_safe, v_exec,
                          out.eval_after.value, out.reward_components, out.terminal});
      }
      state = out.next_state;
    }
    switch (terminal) {
      case TerminalCause::GoalReached: ++goals; break;
      case TerminalCause::ObstacleCollision: ++obstacle_hits; break;
      case TerminalCause::WallCollision: ++wall_hits; break;
      case TerminalCause::Timeout: ++timeouts; break;
      case TerminalCause::None: break;
    }
    length_sum += steps;
    min_h_sum += min_h;
  }

  report.success_rate = static_cast<double>(goals) / n_episodes;
  report.obstacle_collision_rate = static_cast<double>(obstacle_hits) / n_episodes;
  report.wall_collision_rate = static_cast<double>(wall_hits) / n_episodes;
  report.timeout_rate = static_cast<double>(timeouts) / n_episodes;
  report.mean_episode_length = length_sum / n_episodes;
  report.mean_min_h = min_h_sum / n_episodes;
  report.filter_activation_rate =
      total_steps > 0 ? static_cast<double>(activated) / total_steps : 0.0;
  return report;
}

EvalReport evaluate(const GaussianPolicy& policy, const EnvConfig& env_cfg,
                    const FilterParams& filter, int n_episodes, bool runtime_filter, bool dr,
                    std::uint64_t seed, const StepLogger& logger) {
  PolicyFn fn = [&policy](const EnvState&, const Eigen::VectorXd& obs) -> Vec2 {
    Eigen::MatrixXd m = policy.mean(obs);
    return Vec2(m(0, 0), m(1, 0));
  };
  return evaluate_policy(fn, env_cfg, filter, n_episodes, runtime_filter, dr, seed, logger);
}

AblationTable ablation_matrix(const TrainConfig& base, const AblationProgress& progress) {
  base.validate();
  AblationTable table;
  table.rows.reserve(12);

  struct Cell {
    bool trained = false;
    bool failed = false;
    std::string error;
    TrainResult result;
  };
  // 4 training modes x {no DR, DR}
  std::map<std::pair<int, int>, Cell> cells;

  for (const VariantConfig& variant : table_variants()) {
    auto key = std::make_pair(static_cast<int>(variant.training_mode), variant.dr ? 1 : 0);
    Cell& cell = cells[key];
    if (!cell.trained) {
      cell.trained = true;
      if (progress) progress("train", std::string(to_string(variant.training_mode)) +
                                          (variant.dr ? " (DR)" : ""));
      TrainConfig cfg = base;
      cfg.seed = derive_seed(base.seed, kAblationStream + key.first, key.second);
      VariantConfig train_variant_cfg = variant;
      try {
        cell.result = train_variant(train_variant_cfg, cfg);
      } catch (const std::exception& ex) {
        cell.failed = true;
        cell.error = ex.what();
      }
    }

    AblationRow row;
    row.variant = variant;
    if (cell.failed) {
      row.failed = true;
      row.error = cell.error;
    } else {
      if (progress) progress("eval", variant.label);
      try {
        row.report = evaluate(cell.result.policy, base.env, base.filter, base.eval_episodes,
                              variant.deploy_runtime_filter, variant.dr,
                              derive_seed(base.seed, kEvalEpisodeStream, 0));
      } catch (const std::exception& ex) {
        row.failed = true;
        row.error = ex.what();
      }
    }
    table.rows.push_back(std::move(row));
  }

  // DR rows report success degradation against the matching no-DR row
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    AblationRow& row = table.rows[i];
    if (!row.variant.dr || row.failed) continue;
    for (const AblationRow& ref : table.rows) {
      if (ref.variant.dr || ref.failed) continue;
      if (ref.variant.training_mode == row.variant.training_mode &&
          ref.variant.deploy_runtime_filter == row.variant.deploy_runtime_filter) {
        row.dr_delta = row.report.success_rate - ref.report.success_rate;
        break;
      }
    }
  }
  return table;
}

}  // namespace cbfrl
