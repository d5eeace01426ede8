#pragma once

#include <functional>
#include <vector>

#include "cbfrl/geometry.hpp"

namespace cbfrl {

// Circular obstacle: center and radius in meters.
struct Obstacle {
  Vec2 center;
  double radius = 0.0;
};

// Square world [0, L]^2 with a disc agent and circular obstacles.
struct WorldSpec {
  double side_length = 10.0;
  double agent_radius = 0.3;
  std::vector<Obstacle> obstacles;

  // Throws std::invalid_argument if any invariant is violated
  // (L > 0, radii > 0, every obstacle fits: r_agent + r_j < L/2).
  void validate() const;
};

struct ActiveConstraint {
  enum class Kind { Obstacle, WallLeft, WallRight, WallBottom, WallTop };
  Kind kind = Kind::Obstacle;
  int obstacle_index = -1;  // valid iff kind == Obstacle

  bool is_obstacle() const { return kind == Kind::Obstacle; }
  bool operator==(const ActiveConstraint&) const = default;
};

// Barrier value, gradient and the identity of the constraint attaining the
// min. `degenerate` marks the measure-zero case where the agent center
// coincides with the active obstacle center and the gradient is undefined;
// the fallback gradient is then (1, 0).
struct BarrierEval {
  double value = 0.0;
  Vec2 gradient = Vec2::Zero();
  ActiveConstraint active;
  bool degenerate = false;
};

// Affine barrier h(q) = c - n^T q with constant gradient -n.
struct HalfspaceBarrier {
  double boundary_offset = 0.0;  // c
  Vec2 normal = Vec2::UnitX();   // n, unit norm
};

// Min over obstacle clearances and the four wall clearances. Ties are broken
// by lowest obstacle index, then WallLeft, WallRight, WallBottom, WallTop.
BarrierEval eval_composite(const WorldSpec& world, const Vec2& q);

BarrierEval eval_halfspace(const HalfspaceBarrier& b, const Vec2& q);

// Central-difference gradient of eval_composite's value field. Only
// meaningful away from constraint-tie loci and obstacle centers.
Vec2 finite_diff_grad(const WorldSpec& world, const Vec2& q, double step);

using ControllerFn = std::function<Vec2(const Vec2&)>;

// Monte-Carlo estimate of mu(dt) = sup over the region of the absolute
// Taylor remainder |h(q + dt k(q)) - h(q) - grad h(q)^T (dt k(q))|.
// A sampled sup, so a lower estimate of the true mu.
// Throws on samples == 0 or a degenerate evaluation inside the region.
double estimate_remainder_mu(const WorldSpec& world, const Box2& region,
                             const ControllerFn& controller, double dt,
                             std::size_t samples, std::uint64_t seed = 0x5eedu);

double estimate_remainder_mu(const HalfspaceBarrier& b, const Box2& region,
                             const ControllerFn& controller, double dt,
                             std::size_t samples, std::uint64_t seed = 0x5eedu);

}  // namespace cbfrl
