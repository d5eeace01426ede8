#pragma once

#include <map>
#include <string>
#include <vector>

#include "cbfrl/barrier.hpp"
#include "cbfrl/filter.hpp"

namespace cbfrl {

// Template ranges for randomized world generation.
struct WorldTemplate {
  double side_length = 10.0;
  double agent_radius = 0.3;
  int obstacle_count = 3;
  double obstacle_radius_min = 0.5;
  double obstacle_radius_max = 1.0;
  // Minimum free corridor between any two inflated constraints (obstacle to
  // obstacle and obstacle to wall). Guarantees that at most one constraint
  // can be within one control step of the agent at a time, which is what
  // makes the single-constraint filter collision-free around obstacles.
  double min_clearance = 0.5;
};

struct EnvConfig {
  WorldTemplate world;
  double dt = 0.05;             // s
  double v_max = 2.0;           // m/s
  int horizon = 200;            // steps
  double goal_radius = 0.3;     // m
  double init_margin = 0.2;     // m, required barrier clearance at reset
  bool dr_enabled = false;
  double dr_scale = 0.2;        // fraction of v_max, per-axis noise std
  double cbf_weight = 100.0;    // w
  double cbf_sigma = 0.5;       // m/s
  double alpha = 1.0;           // 1/s
  // When false, the CBF reward is capped at zero (pure intervention
  // penalty); when true the positive margin term is paid out as written.
  bool cbf_margin_bonus = false;

  void validate() const;
  FilterParams filter_params() const { return {alpha, dt}; }
};

struct EnvState {
  Vec2 q = Vec2::Zero();
  Vec2 goal = Vec2::Zero();
  WorldSpec world;
  int step_count = 0;
  bool done = false;
  Rng rng;  // per-environment stream (DR noise)

  bool operator==(const EnvState&) const;
};

enum class TerminalCause { None, GoalReached, ObstacleCollision, WallCollision, Timeout };

const char* to_string(TerminalCause cause);

struct RewardComponents {
  double goal = 0.0;
  double obstacle = 0.0;
  double wall = 0.0;
  double progress = 0.0;
  double alive = 0.0;
  double cbf = 0.0;
  double timeout = 0.0;

  double total() const { return goal + obstacle + wall + progress + alive + cbf + timeout; }
  std::map<std::string, double> as_map() const;
};

struct StepOutcome {
  EnvState next_state;
  RewardComponents reward_components;
  double total_reward = 0.0;
  TerminalCause terminal = TerminalCause::None;
  BarrierEval eval_before;  // barrier at the pre-step configuration
  BarrierEval eval_after;   // barrier at the post-step configuration
};

// Samples a world satisfying the template's clearance rules and an agent /
// goal pair at barrier clearance >= init_margin with |q - g| > goal_radius.
// Identical seeds produce identical states. Throws std::runtime_error when
// rejection sampling exceeds 10^4 attempts in any phase.
EnvState reset(const EnvConfig& config, std::uint64_t seed);

// Euler step q' = q + (v_exec + d) dt with optional Gaussian DR noise d.
// v_policy and v_safe feed the CBF reward regardless of which was executed;
// `cbf_reward_enabled` gates the cbf component (off for Nominal/FilterOnly
// training). Stepping a done state returns it unchanged with zero rewards.
StepOutcome step(const EnvState& state, const Vec2& v_exec, const Vec2& v_policy,
                 const Vec2& v_safe, const EnvConfig& config, bool cbf_reward_enabled = true);

// Elementwise step over parallel environments. Throws on length mismatch.
std::vector<StepOutcome> batch_step(const std::vector<EnvState>& states,
                                    const std::vector<Vec2>& v_exec,
                                    const std::vector<Vec2>& v_policy,
                                    const std::vector<Vec2>& v_safe, const EnvConfig& config,
                                    bool cbf_reward_enabled = true);

// w [max(a^T v_policy - b, 0) + exp(-|v_policy - v_safe|^2 / sigma^2) - 1]
// with a = grad h, b = -alpha h. Returns 0 for a degenerate eval.
double cbf_reward(const BarrierEval& eval, const Vec2& v_policy, const Vec2& v_safe,
                  const EnvConfig& config);

// Observation: [(g-q)/L, q/L, per obstacle sorted by clearance: ((p_j-q)/L,
// (r_agent+r_j)/L), h(q)/L, signed wall clearances /L].
int observation_dim(const EnvConfig& config);
Eigen::VectorXd observe(const EnvState& state, const EnvConfig& config);

}  // namespace cbfrl
