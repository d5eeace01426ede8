#include "cbfrl/verify.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cbfrl/config.hpp"
#include "cbfrl/metrics_io.hpp"

namespace cbfrl {

namespace {

WorldSpec random_world(Rng& rng) {
  WorldSpec world;
  world.side_length = 10.0;
  world.agent_radius = 0.3;
  const int count = 1 + static_cast<int>(rng() % 3);
  for (int j = 0; j < count; ++j) {
    Obstacle ob;
    ob.radius = uniform(rng, 0.5, 1.0);
    ob.center = {uniform(rng, 1.5, 8.5), uniform(rng, 1.5, 8.5)};
    world.obstacles.push_back(ob);
  }
  return world;
}

Vec2 random_in_ball(Rng& rng, double radius) {
  double r = radius * std::sqrt(uniform01(rng));
  double theta = uniform(rng, 0.0, 2.0 * M_PI);
  return {r * std::cos(theta), r * std::sin(theta)};
}

// Sample a configuration whose barrier eval is non-degenerate.
Vec2 random_config(const WorldSpec& world, Rng& rng) {
  while (true) {
    Vec2 q{uniform(rng, 0.0, world.side_length), uniform(rng, 0.0, world.side_length)};
    bool near_center = false;
    for (const Obstacle& ob : world.obstacles) {
      if ((q - ob.center).norm() < 1e-6) near_center = true;
    }
    if (!near_center) return q;
  }
}

std::string num(double v) {
  std::ostringstream out;
  out.precision(6);
  out << v;
  return out.str();
}

}  // namespace

SuiteResult run_filter_suite(std::size_t instances, bool inject_sign_flip, std::uint64_t seed) {
  SuiteResult suite{"filter", {}};
  Rng rng = make_rng(seed, 0xf117e6u);
  const double tol = 1e-9;

  std::size_t kkt_failures = 0;
  std::size_t activated_count = 0;
  double worst_idempotence = 0.0;
  double worst_scale = 0.0;
  std::size_t minimality_violations = 0;

  WorldSpec world = random_world(rng);
  for (std::size_t i = 0; i < instances; ++i) {
    if (i % 1000 == 0) world = random_world(rng);
    Vec2 q = random_config(world, rng);
    BarrierEval eval = eval_composite(world, q);
    FilterParams params{uniform(rng, 0.1, 5.0), 0.05};
    Vec2 v_policy = random_in_ball(rng, 4.0);

    FilterOutcome outcome = filter_action(eval, params, v_policy);
    Vec2 candidate = outcome.v_safe;
    if (inject_sign_flip && outcome.activated) candidate = v_policy - outcome.intervention;
    if (!kkt_oracle_check(eval, params, v_policy, candidate, tol)) ++kkt_failures;
    if (outcome.activated) ++activated_count;

    FilterOutcome twice = filter_action(eval, params, outcome.v_safe);
    worst_idempotence = std::max(worst_idempotence, (twice.v_safe - outcome.v_safe).norm());

    // scaling a -> 2a, b -> 2b leaves the halfspace, hence the projection,
    // unchanged
    BarrierEval scaled = eval;
    scaled.gradient *= 2.0;
    scaled.value *= 2.0;  // b = -alpha h doubles with h
    FilterOutcome outcome2 = filter_action(scaled, params, v_policy);
    worst_scale = std::max(worst_scale, (outcome2.v_safe - outcome.v_safe).norm());

    // sampled minimality on a sparse subset of the activated instances
    if (outcome.activated && i % 100 == 0) {
      double best = outcome.intervention.norm();
      for (int s = 0; s < 1000; ++s) {
        Vec2 v = v_policy + random_in_ball(rng, 2.0 * best);
        double b = -params.alpha * eval.value;
        if (eval.gradient.dot(v) >= b && (v - v_policy).norm() < best - 1e-9)
          ++minimality_violations;
      }
    }
  }

  suite.checks.push_back({"kkt_oracle_sweep", kkt_failures == 0,
                          std::to_string(instances) + " instances, " +
                              std::to_string(kkt_failures) + " failures, " +
                              std::to_string(activated_count) + " activated"});
  suite.checks.push_back(
      {"idempotence", worst_idempotence <= 1e-12, "worst |delta| = " + num(worst_idempotence)});
  suite.checks.push_back(
      {"scale_invariance", worst_scale <= 1e-12, "worst |delta| = " + num(worst_scale)});
  suite.checks.push_back({"sampled_minimality", minimality_violations == 0,
                          std::to_string(minimality_violations) + " closer feasible samples"});
  return suite;
}

SuiteResult run_barrier_suite(std::size_t fd_points, std::uint64_t seed) {
  SuiteResult suite{"barrier", {}};
  Rng rng = make_rng(seed, 0xba661e6u);
  const double step = 1e-5;

  // gradient vs central differences at smooth points
  double worst_fd = 0.0;
  std::size_t checked = 0;
  WorldSpec world = random_world(rng);
  while (checked < fd_points) {
    Vec2 q = random_config(world, rng);
    // keep away from tie loci and obstacle centers per the FD precondition
    std::vector<double> terms;
    for (const Obstacle& ob : world.obstacles)
      terms.push_back((q - ob.center).norm() - world.agent_radius - ob.radius);
    terms.push_back(q.x() - world.agent_radius);
    terms.push_back(world.side_length - q.x() - world.agent_radius);
    terms.push_back(q.y() - world.agent_radius);
    terms.push_back(world.side_length - q.y() - world.agent_radius);
    std::sort(terms.begin(), terms.end());
    if (terms[1] - terms[0] < 1e-3) continue;
    bool near_center = false;
    for (const Obstacle& ob : world.obstacles)
      if ((q - ob.center).norm() < 0.05) near_center = true;
    if (near_center) continue;

    Vec2 fd = finite_diff_grad(world, q, step);
    Vec2 grad = eval_composite(world, q).gradient;
    worst_fd = std::max(worst_fd, (fd - grad).norm() / std::max(1.0, grad.norm()));
    ++checked;
    if (checked % 500 == 0) world = random_world(rng);
  }
  suite.checks.push_back({"finite_difference_gradient", worst_fd <= 1e-4,
                          "worst rel err = " + num(worst_fd) + " over " +
                              std::to_string(checked) + " points"});

  // |h(q1) - h(q2)| <= |q1 - q2|
  double worst_lipschitz = 0.0;
  for (int i = 0; i < 100000; ++i) {
    if (i % 1000 == 0) world = random_world(rng);
    Vec2 q1{uniform(rng, -1.0, 11.0), uniform(rng, -1.0, 11.0)};
    Vec2 q2{uniform(rng, -1.0, 11.0), uniform(rng, -1.0, 11.0)};
    double lhs = std::abs(eval_composite(world, q1).value - eval_composite(world, q2).value);
    worst_lipschitz = std::max(worst_lipschitz, lhs - (q1 - q2).norm());
  }
  suite.checks.push_back({"lipschitz_1", worst_lipschitz <= 1e-12,
                          "worst excess = " + num(worst_lipschitz) + " over 1e5 pairs"});

  // affine barrier has identically zero Taylor remainder
  double worst_remainder = 0.0;
  for (int i = 0; i < 10000; ++i) {
    double theta = uniform(rng, 0.0, 2.0 * M_PI);
    HalfspaceBarrier b{uniform(rng, -3.0, 3.0), {std::cos(theta), std::sin(theta)}};
    Vec2 q{uniform(rng, -5.0, 5.0), uniform(rng, -5.0, 5.0)};
    Vec2 w{uniform(rng, -5.0, 5.0), uniform(rng, -5.0, 5.0)};
    BarrierEval e = eval_halfspace(b, q);
    double r = eval_halfspace(b, q + w).value - e.value - e.gradient.dot(w);
    worst_remainder = std::max(worst_remainder, std::abs(r));
  }
  suite.checks.push_back({"halfspace_zero_remainder", worst_remainder <= 1e-12,
                          "worst |R| = " + num(worst_remainder)});

  // mu(dt)/dt strictly decreasing for the circular-obstacle barrier
  WorldSpec circle;
  circle.side_length = 10.0;
  circle.agent_radius = 0.3;
  circle.obstacles = {{{5.0, 5.0}, 1.0}};
  Box2 region{{4.3, 6.3}, {5.7, 6.9}};
  ControllerFn constant = [](const Vec2&) { return Vec2{1.0, 0.0}; };
  std::vector<double> ratios;
  bool decreasing = true;
  for (double dt : {0.1, 0.05, 0.025, 0.0125}) {
    double mu = estimate_remainder_mu(circle, region, constant, dt, 20000, seed);
    ratios.push_back(mu / dt);
    if (ratios.size() > 1 && ratios[ratios.size() - 1] >= ratios[ratios.size() - 2])
      decreasing = false;
  }
  std::ostringstream detail;
  detail << "mu/dt =";
  for (double r : ratios) detail << ' ' << num(r);
  suite.checks.push_back({"remainder_scaling", decreasing, detail.str()});
  return suite;
}

SuiteResult run_bound_suite(const std::string& out_dir, std::uint64_t seed) {
  SuiteResult suite{"bound", {}};
  FilterParams params{1.0, 0.05};

  // exact case: affine h with the equality controller grad h . v = -alpha h
  {
    HalfspaceBarrier barrier{3.0, {1.0, 0.0}};
    Vec2 q{1.0, 0.0};
    std::vector<double> trace;
    double h0 = eval_halfspace(barrier, q).value;
    trace.push_back(h0);
    for (int k = 0; k < 1000; ++k) {
      BarrierEval e = eval_halfspace(barrier, q);
      Vec2 v = params.alpha * e.value * barrier.normal;
      q += params.dt * v;
      trace.push_back(eval_halfspace(barrier, q).value);
    }
    CertificateReport report = certify_dtcbf_bound(trace, h0, params, 0.0);
    double worst = 0.0;
    for (const auto& e : report.entries) worst = std::max(worst, std::abs(e.slack));
    suite.checks.push_back({"halfspace_exact_bound", report.pass && worst <= 1e-12,
                            "max |slack| = " + num(worst) + " over 1000 steps"});
  }

  // filtered rollout toward a circular obstacle, certified against the
  // inflated Monte-Carlo remainder estimate
  {
    WorldSpec world;
    world.side_length = 10.0;
    world.agent_radius = 0.3;
    world.obstacles = {{{5.0, 5.0}, 1.0}};

    auto scripted = [&](const Vec2& q) {
      Vec2 toward = world.obstacles[0].center - q;
      double n = toward.norm();
      return n > 0.0 ? Vec2(2.0 * toward / n) : Vec2::Zero();
    };
    ControllerFn closed_loop = [&](const Vec2& q) {
      return filter_action(eval_composite(world, q), params, scripted(q)).v_safe;
    };

    Vec2 q{5.0, 7.5};
    std::vector<double> trace;
    double h0 = eval_composite(world, q).value;
    trace.push_back(h0);
    for (int k = 0; k < 400; ++k) {
      q += params.dt * closed_loop(q);
      trace.push_back(eval_composite(world, q).value);
    }

    Box2 region{{4.9, 6.25}, {5.1, 7.55}};
    double mu = 2.0 * estimate_remainder_mu(world, region, closed_loop, params.dt, 20000, seed);
    CertificateReport report = certify_dtcbf_bound(trace, h0, params, mu);
    suite.checks.push_back({"filtered_rollout_bound", report.pass,
                            "mu_hat = " + num(mu) + ", " +
                                std::to_string(report.entries.size()) + " steps"});
    if (!out_dir.empty()) {
      std::filesystem::create_directories(out_dir);
      write_certificate_jsonl((std::filesystem::path(out_dir) / "bound_certificate.jsonl").string(),
                              report);
      std::ofstream wf(std::filesystem::path(out_dir) / "bound_world.json");
      wf << world_to_json(world).dump(1) << "\n";
    }
  }

  // a trace dipping below the bound must be rejected
  {
    std::vector<double> fabricated{1.0, 0.9, 0.2, 0.1};
    CertificateReport report = certify_dtcbf_bound(fabricated, 1.0, params, 0.0);
    suite.checks.push_back(
        {"violation_detected", !report.pass, "fabricated dip correctly rejected"});
  }
  return suite;
}

}  // namespace cbfrl
