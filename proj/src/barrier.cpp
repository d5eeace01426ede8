#include "cbfrl/barrier.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cbfrl {

void WorldSpec::validate() const {
  if (side_length <= 0.0) throw std::invalid_argument("WorldSpec: side_length must be > 0");
  if (agent_radius <= 0.0) throw std::invalid_argument("WorldSpec: agent_radius must be > 0");
  for (std::size_t j = 0; j < obstacles.size(); ++j) {
    if (obstacles[j].radius <= 0.0)
      throw std::invalid_argument("WorldSpec: obstacle " + std::to_string(j) + " radius must be > 0");
    if (agent_radius + obstacles[j].radius >= 0.5 * side_length)
      throw std::invalid_argument("WorldSpec: obstacle " + std::to_string(j) +
                                  " leaves no safe configuration (r_agent + r_j >= L/2)");
  }
}

BarrierEval eval_composite(const WorldSpec& world, const Vec2& q) {
  BarrierEval best;
  bool have = false;

  auto consider = [&](double value, const Vec2& grad, ActiveConstraint active, bool degenerate) {
    // strict < keeps the first (lowest-priority-index) term on ties
    if (!have || value < best.value) {
      best = BarrierEval{value, grad, active, degenerate};
      have = true;
    }
  };

  for (std::size_t j = 0; j < world.obstacles.size(); ++j) {
    const Obstacle& ob = world.obstacles[j];
    Vec2 d = q - ob.center;
    double dist = d.norm();
    double value = dist - (world.agent_radius + ob.radius);
    ActiveConstraint active{ActiveConstraint::Kind::Obstacle, static_cast<int>(j)};
    if (dist == 0.0) {
      consider(value, Vec2::UnitX(), active, true);
    } else {
      consider(value, d / dist, active, false);
    }
  }

  const double L = world.side_length;
  const double r = world.agent_radius;
  consider(q.x() - r, Vec2::UnitX(), {ActiveConstraint::Kind::WallLeft, -1}, false);
  consider((L - q.x()) - r, -Vec2::UnitX(), {ActiveConstraint::Kind::WallRight, -1}, false);
  consider(q.y() - r, Vec2::UnitY(), {ActiveConstraint::Kind::WallBottom, -1}, false);
  consider((L - q.y()) - r, -Vec2::UnitY(), {ActiveConstraint::Kind::WallTop, -1}, false);
  return best;
}

BarrierEval eval_halfspace(const HalfspaceBarrier& b, const Vec2& q) {
  BarrierEval eval;
  eval.value = b.boundary_offset - b.normal.dot(q);
  eval.gradient = -b.normal;
  eval.active = {ActiveConstraint::Kind::WallLeft, -1};
  eval.degenerate = false;
  return eval;
}

Vec2 finite_diff_grad(const WorldSpec& world, const Vec2& q, double step) {
  Vec2 g;
  for (int i = 0; i < 2; ++i) {
    Vec2 lo = q, hi = q;
    lo(i) -= step;
    hi(i) += step;
    g(i) = (eval_composite(world, hi).value - eval_composite(world, lo).value) / (2.0 * step);
  }
  return g;
}

namespace {

// Shared core: max sampled |h(q+w) - h(q) - grad^T w| with w = dt * k(q).
double remainder_mu_impl(const std::function<BarrierEval(const Vec2&)>& eval,
                         const Box2& region, const ControllerFn& controller, double dt,
                         std::size_t samples, std::uint64_t seed) {
  if (samples == 0) throw std::invalid_argument("estimate_remainder_mu: samples must be >= 1");
  Rng rng = make_rng(seed, 0x4d55u);
  double mu = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    Vec2 q = region.sample(rng);
    BarrierEval e = eval(q);
    if (e.degenerate)
      throw std::runtime_error("estimate_remainder_mu: degenerate barrier evaluation in region");
    Vec2 w = dt * controller(q);
    double remainder = eval(q + w).value - e.value - e.gradient.dot(w);
    mu = std::max(mu, std::abs(remainder));
  }
  return mu;
}

}  // namespace

double estimate_remainder_mu(const WorldSpec& world, const Box2& region,
                             const ControllerFn& controller, double dt,
                             std::size_t samples, std::uint64_t seed) {
  return remainder_mu_impl([&](const Vec2& q) { return eval_composite(world, q); }, region,
                           controller, dt, samples, seed);
}

double estimate_remainder_mu(const HalfspaceBarrier& b, const Box2& region,
                             const ControllerFn& controller, double dt,
                             std::size_t samples, std::uint64_t seed) {
  return remainder_mu_impl([&](const Vec2& q) { return eval_halfspace(b, q); }, region,
                           controller, dt, samples, seed);
}

}  // namespace cbfrl
