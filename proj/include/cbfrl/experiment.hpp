#pragma once

#include <functional>
#include <optional>
#include <string>

#include "cbfrl/env.hpp"
#include "cbfrl/ppo.hpp"

namespace cbfrl {

enum class TrainingMode { Nominal, RewardOnly, FilterOnly, Dual };

const char* to_string(TrainingMode mode);
TrainingMode training_mode_from_string(const std::string& s);

// One row of the method matrix: how the policy is trained, whether the
// closed-form filter runs at deployment, and whether dynamics noise is
// injected (in both training and evaluation).
struct VariantConfig {
  TrainingMode training_mode = TrainingMode::Nominal;
  bool deploy_runtime_filter = false;
  bool dr = false;
  std::string label = "Nominal";

  bool train_applies_filter() const {
    return training_mode == TrainingMode::FilterOnly || training_mode == TrainingMode::Dual;
  }
  bool train_applies_reward() const {
    return training_mode == TrainingMode::RewardOnly || training_mode == TrainingMode::Dual;
  }
  // Any variant touching the CBF machinery computes the filter outcome.
  bool computes_filter() const { return train_applies_filter() || train_applies_reward(); }
};

// The 12 method configurations, in canonical order.
std::vector<VariantConfig> table_variants();

struct TrainConfig {
  int num_envs = 256;
  int num_iterations = 1500;
  int steps_per_iteration = 24;
  std::uint64_t seed = 1;
  int eval_episodes = 1000;
  EnvConfig env;
  PpoConfig ppo;
  FilterParams filter{1.0, 0.05};

  void validate() const;
};

struct IterationMetrics {
  int iteration = 0;
  double mean_step_reward = 0.0;
  double mean_cbf_reward = 0.0;
  double filter_activation_rate = 0.0;
  int episodes = 0;
  int goals = 0;
  int obstacle_collisions = 0;
  int wall_collisions = 0;
  int timeouts = 0;
  double mean_episode_return = 0.0;  // over episodes completed this iteration
  double mean_episode_length = 0.0;
  double mean_min_h = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
};

struct TrainingCurves {
  std::vector<IterationMetrics> iterations;
  long total_obstacle_collisions = 0;
  long total_wall_collisions = 0;
  long total_goals = 0;
  long total_timeouts = 0;
  long total_episodes = 0;
};

struct TrainResult {
  GaussianPolicy policy;
  ValueNet value;
  TrainingCurves curves;
  std::uint64_t seed = 0;
  VariantConfig variant;
};

using IterationCallback = std::function<void(const IterationMetrics&)>;

// Trains one variant: the policy proposes v_policy; variants with filtering
// execute the closed-form safe action, others execute the proposal; variants
// with reward shaping add the CBF reward. Environments auto-reset.
TrainResult train_variant(const VariantConfig& variant, const TrainConfig& cfg,
                          const IterationCallback& on_iteration = nullptr);

struct EvalReport {
  int n_episodes = 0;
  double success_rate = 0.0;
  double obstacle_collision_rate = 0.0;
  double wall_collision_rate = 0.0;
  double timeout_rate = 0.0;
  double mean_episode_length = 0.0;
  double mean_min_h = 0.0;
  double filter_activation_rate = 0.0;

  double collision_rate() const { return obstacle_collision_rate + wall_collision_rate; }
};

// Per-step record for trajectory export.
struct StepRecord {
  int episode = 0;
  int step = 0;
  Vec2 q;
  Vec2 v_policy;
  Vec2 v_safe;
  Vec2 v_exec;
  double h = 0.0;
  RewardComponents rewards;
  TerminalCause terminal = TerminalCause::None;
};

using StepLogger = std::function<void(const StepRecord&)>;

// Deterministic map from state/observation to a proposed velocity.
using PolicyFn = std::function<Vec2(const EnvState&, const Eigen::VectorXd&)>;

// Runs n seeded episodes with deterministic actions; the closed-form filter
// is applied at deployment iff runtime_filter. Episode seeds are derived
// from a stream disjoint from training seeds.
EvalReport evaluate_policy(const PolicyFn& policy_fn, const EnvConfig& env_cfg,
                           const FilterParams& filter, int n_episodes, bool runtime_filter,
                           bool dr, std::uint64_t seed, const StepLogger& logger = nullptr);

// Same, proposing the clipped mean action of a Gaussian policy.
EvalReport evaluate(const GaussianPolicy& policy, const EnvConfig& env_cfg,
                    const FilterParams& filter, int n_episodes, bool runtime_filter, bool dr,
                    std::uint64_t seed, const StepLogger& logger = nullptr);

struct AblationRow {
  VariantConfig variant;
  bool failed = false;
  std::string error;
  EvalReport report;
  // success delta against the matching no-DR row; set on DR rows only
  std::optional<double> dr_delta;
};

struct AblationTable {
  std::vector<AblationRow> rows;
};

using AblationProgress = std::function<void(const std::string& stage, const std::string& label)>;

// Trains the 4 training modes x {DR, no DR} and evaluates each under its
// deployment mode(s), producing the 12 labeled rows with DR-degradation
// deltas. A failed variant marks its rows failed instead of aborting.
AblationTable ablation_matrix(const TrainConfig& base, const AblationProgress& progress = nullptr);

}  // namespace cbfrl
