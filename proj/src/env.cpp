#include "cbfrl/env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace cbfrl {

namespace {
constexpr int kMaxRejectionAttempts = 10000;
constexpr std::uint64_t kResetStream = 0x7e5e7u;
}  // namespace

void EnvConfig::validate() const {
  if (dt <= 0.0) throw std::invalid_argument("EnvConfig: dt must be > 0");
  if (v_max <= 0.0) throw std::invalid_argument("EnvConfig: v_max must be > 0");
  if (horizon <= 0) throw std::invalid_argument("EnvConfig: horizon must be > 0");
  if (goal_radius <= 0.0) throw std::invalid_argument("EnvConfig: goal_radius must be > 0");
  if (dr_scale < 0.0 || dr_scale > 1.0)
    throw std::invalid_argument("EnvConfig: dr_scale must be in [0, 1]");
  if (init_margin < 0.0) throw std::invalid_argument("EnvConfig: init_margin must be >= 0");
  if (cbf_sigma <= 0.0) throw std::invalid_argument("EnvConfig: cbf_sigma must be > 0");
  if (alpha <= 0.0) throw std::invalid_argument("EnvConfig: alpha must be > 0");
  if (world.obstacle_count < 0)
    throw std::invalid_argument("EnvConfig: obstacle_count must be >= 0");
  if (world.obstacle_radius_min <= 0.0 || world.obstacle_radius_max < world.obstacle_radius_min)
    throw std::invalid_argument("EnvConfig: invalid obstacle radius range");
  if (world.agent_radius + world.obstacle_radius_max >= 0.5 * world.side_length)
    throw std::invalid_argument("EnvConfig: obstacle radius range leaves no safe configuration");
}

bool EnvState::operator==(const EnvState& other) const {
  if (q != other.q || goal != other.goal || step_count != other.step_count ||
      done != other.done || rng != other.rng)
    return false;
  if (world.side_length != other.world.side_length ||
      world.agent_radius != other.world.agent_radius ||
      world.obstacles.size() != other.world.obstacles.size())
    return false;
  for (std::size_t j = 0; j < world.obstacles.size(); ++j) {
    if (world.obstacles[j].center != other.world.obstacles[j].center ||
        world.obstacles[j].radius != other.world.obstacles[j].radius)
      return false;
  }
  return true;
}

const char* to_string(TerminalCause cause) {
  switch (cause) {
    case TerminalCause::None: return "none";
    case TerminalCause::GoalReached: return "goal";
    case TerminalCause::ObstacleCollision: return "obstacle_collision";
    case TerminalCause::WallCollision: return "wall_collision";
    case TerminalCause::Timeout: return "timeout";
  }
  return "?";
}

std::map<std::string, double> RewardComponents::as_map() const {
  return {{"goal", goal},   {"obstacle", obstacle}, {"wall", wall},       {"progress", progress},
          {"alive", alive}, {"cbf", cbf},           {"timeout", timeout}};
}

namespace {

WorldSpec sample_world(const WorldTemplate& tmpl, Rng& rng) {
  WorldSpec world;
  world.side_length = tmpl.side_length;
  world.agent_radius = tmpl.agent_radius;
  world.obstacles.reserve(tmpl.obstacle_count);

  int attempts = 0;
  while (static_cast<int>(world.obstacles.size()) < tmpl.obstacle_count) {
    if (++attempts > kMaxRejectionAttempts)
      throw std::runtime_error("reset: world rejection sampling exhausted (overcrowded world)");
    Obstacle ob;
    ob.radius = uniform(rng, tmpl.obstacle_radius_min, tmpl.obstacle_radius_max);
    // keep the inflated disc min_clearance away from every inflated wall
    double wall_margin = ob.radius + 2.0 * tmpl.agent_radius + tmpl.min_clearance;
    if (2.0 * wall_margin >= tmpl.side_length) continue;
    ob.center = {uniform(rng, wall_margin, tmpl.side_length - wall_margin),
                 uniform(rng, wall_margin, tmpl.side_length - wall_margin)};
    bool ok = true;
    for (const Obstacle& other : world.obstacles) {
      double gap = (ob.center - other.center).norm() - ob.radius - other.radius -
                   2.0 * tmpl.agent_radius - tmpl.min_clearance;
      if (gap < 0.0) {
        ok = false;
        break;
      }
    }
    if (ok) world.obstacles.push_back(ob);
  }
  world.validate();
  return world;
}

Vec2 sample_clear_point(const WorldSpec& world, double margin, Rng& rng, const char* what) {
  for (int attempt = 0; attempt < kMaxRejectionAttempts; ++attempt) {
    Vec2 p{uniform(rng, 0.0, world.side_length), uniform(rng, 0.0, world.side_length)};
    if (eval_composite(world, p).value >= margin) return p;
  }
  throw std::runtime_error(std::string("reset: ") + what +
                           " rejection sampling exhausted (overcrowded world)");
}

}  // namespace

EnvState reset(const EnvConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng = make_rng(seed, kResetStream);

  EnvState state;
  state.world = sample_world(config.world, rng);
  state.q = sample_clear_point(state.world, config.init_margin, rng, "agent");
  for (int attempt = 0;; ++attempt) {
    if (attempt >= kMaxRejectionAttempts)
      throw std::runtime_error("reset: goal rejection sampling exhausted (overcrowded world)");
    Vec2 g = sample_clear_point(state.world, config.init_margin, rng, "goal");
    if ((g - state.q).norm() > config.goal_radius) {
      state.goal = g;
      break;
    }
  }
  state.step_count = 0;
  state.done = false;
  state.rng = rng;
  return state;
}

double cbf_reward(const BarrierEval& eval, const Vec2& v_policy, const Vec2& v_safe,
                  const EnvConfig& config) {
  if (eval.degenerate) return 0.0;
  double b = -config.alpha * eval.value;
  double margin = eval.gradient.dot(v_policy) - b;
  double closeness = std::exp(-(v_policy - v_safe).squaredNorm() /
                              (config.cbf_sigma * config.cbf_sigma));
  return config.cbf_weight * (std::max(margin, 0.0) + closeness - 1.0);
}

StepOutcome step(const EnvState& state, const Vec2& v_exec, const Vec2& v_policy,
                 const Vec2& v_safe, const EnvConfig& config, bool cbf_reward_enabled) {
  StepOutcome out;
  out.next_state = state;
  out.eval_before = eval_composite(state.world, state.q);
  if (state.done) {
    out.eval_after = out.eval_before;
    return out;  // inactive episode: everything masked
  }

  EnvState& next = out.next_state;
  Vec2 disturbance = Vec2::Zero();
  if (config.dr_enabled) {
    disturbance = config.dr_scale * config.v_max * normal_pair(next.rng);
  }
  next.q = state.q + (v_exec + disturbance) * config.dt;
  next.step_count = state.step_count + 1;

  out.eval_after = eval_composite(state.world, next.q);
  double dist_to_goal = (next.q - state.goal).norm();
  if (out.eval_after.value < 0.0) {
    out.terminal = out.eval_after.active.is_obstacle() ? TerminalCause::ObstacleCollision
                                                       : TerminalCause::WallCollision;
  } else if (dist_to_goal <= config.goal_radius) {
    out.terminal = TerminalCause::GoalReached;
  } else if (next.step_count >= config.horizon) {
    out.terminal = TerminalCause::Timeout;
  }
  next.done = out.terminal != TerminalCause::None;

  RewardComponents& r = out.reward_components;
  r.goal = out.terminal == TerminalCause::GoalReached ? 1.0 : 0.0;
  r.obstacle = out.terminal == TerminalCause::ObstacleCollision ? -1.0 : 0.0;
  r.wall = out.terminal == TerminalCause::WallCollision ? -1.0 : 0.0;
  r.timeout = out.terminal == TerminalCause::Timeout ? -10.0 : 0.0;
  r.progress =
      20.0 * ((state.q - state.goal).norm() - dist_to_goal) / (config.v_max * config.dt);
  r.alive = 0.01;
  if (cbf_reward_enabled) {
    r.cbf = cbf_reward(out.eval_before, v_policy, v_safe, config);
    if (!config.cbf_margin_bonus) r.cbf = std::min(r.cbf, 0.0);
  }
  out.total_reward = r.total();
  return out;
}

std::vector<StepOutcome> batch_step(const std::vector<EnvState>& states,
                                    const std::vector<Vec2>& v_exec,
                                    const std::vector<Vec2>& v_policy,
                                    const std::vector<Vec2>& v_safe, const EnvConfig& config,
                                    bool cbf_reward_enabled) {
  if (states.size() != v_exec.size() || states.size() != v_policy.size() ||
      states.size() != v_safe.size())
    throw std::invalid_argument("batch_step: length mismatch");
  std::vector<StepOutcome> out;
  out.reserve(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    out.push_back(step(states[i], v_exec[i], v_policy[i], v_safe[i], config, cbf_reward_enabled));
  }
  return out;
}

int observation_dim(const EnvConfig& config) {
  return 2 + 2 + 3 * config.world.obstacle_count + 1 + 4;
}

Eigen::VectorXd observe(const EnvState& state, const EnvConfig& config) {
  if (static_cast<int>(state.world.obstacles.size()) != config.world.obstacle_count)
    throw std::invalid_argument("observe: world obstacle count does not match config");
  const double L = state.world.side_length;
  const double r = state.world.agent_radius;
  Eigen::VectorXd obs(observation_dim(config));
  int k = 0;
  obs.segment<2>(k) = (state.goal - state.q) / L;
  k += 2;
  obs.segment<2>(k) = state.q / L;
  k += 2;

  std::vector<int> order(state.world.obstacles.size());
  std::iota(order.begin(), order.end(), 0);
  auto clearance = [&](int j) {
    const Obstacle& ob = state.world.obstacles[j];
    return (state.q - ob.center).norm() - (r + ob.radius);
  };
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    double ca = clearance(a), cb = clearance(b);
    return ca != cb ? ca < cb : a < b;
  });
  for (int j : order) {
    const Obstacle& ob = state.world.obstacles[j];
    obs.segment<2>(k) = (ob.center - state.q) / L;
    k += 2;
    obs(k++) = (r + ob.radius) / L;
  }

  obs(k++) = eval_composite(state.world, state.q).value / L;
  obs(k++) = (state.q.x() - r) / L;
  obs(k++) = ((L - state.q.x()) - r) / L;
  obs(k++) = (state.q.y() - r) / L;
  obs(k++) = ((L - state.q.y()) - r) / L;
  return obs;
}

}  // namespace cbfrl
