#pragma once

#include <Eigen/Dense>

#include "cbfrl/rng.hpp"

namespace cbfrl {

using Vec2 = Eigen::Vector2d;

// Axis-aligned box, used for remainder-estimation regions.
struct Box2 {
  Vec2 lo;
  Vec2 hi;

  bool contains(const Vec2& p) const {
    return p.x() >= lo.x() && p.x() <= hi.x() && p.y() >= lo.y() && p.y() <= hi.y();
  }

  Vec2 sample(Rng& rng) const {
    return {uniform(rng, lo.x(), hi.x()), uniform(rng, lo.y(), hi.y())};
  }
};

// Projects v onto the closed Euclidean ball of radius r.
inline Vec2 clip_to_ball(const Vec2& v, double r) {
  double n = v.norm();
  if (n <= r) return v;
  return v * (r / n);
}

}  // namespace cbfrl
