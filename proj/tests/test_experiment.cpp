#include <doctest.h>

#include <cmath>

#include "cbfrl/config.hpp"
#include "cbfrl/experiment.hpp"
#include "cbfrl/metrics_io.hpp"

using namespace cbfrl;

namespace {

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.num_envs = 8;
  cfg.num_iterations = 2;
  cfg.steps_per_iteration = 16;
  cfg.seed = 5;
  cfg.eval_episodes = 4;
  cfg.ppo.minibatch_size = 64;
  return cfg;
}

}  // namespace

TEST_CASE("table variants match the method matrix") {
  std::vector<VariantConfig> rows = table_variants();
  REQUIRE(rows.size() == 12);
  CHECK(rows[0].label == "Nominal");
  CHECK(rows[1].label == "Dual");
  CHECK(rows[2].label == "Dual (w/o rt. filt.)");
  CHECK(rows[3].label == "Reward Only");
  CHECK(rows[4].label == "Filter Only");
  CHECK(rows[5].label == "Filter Only (w/o rt. filt.)");
  CHECK(rows[6].label == "Nominal DR");
  CHECK(rows[11].label == "Filter Only (w/o rt. filt.) DR");
  for (int i = 0; i < 6; ++i) {
    CHECK_FALSE(rows[i].dr);
    CHECK(rows[i + 6].dr);
    CHECK(rows[i].training_mode == rows[i + 6].training_mode);
  }
  // labels reproduce the canonical naming
  for (const VariantConfig& v : rows) {
    CHECK(v.label == variant_label(v.training_mode, v.deploy_runtime_filter, v.dr));
  }
}

TEST_CASE("variant semantics") {
  CHECK_FALSE(VariantConfig{TrainingMode::Nominal}.computes_filter());
  CHECK(VariantConfig{TrainingMode::RewardOnly}.train_applies_reward());
  CHECK_FALSE(VariantConfig{TrainingMode::RewardOnly}.train_applies_filter());
  CHECK(VariantConfig{TrainingMode::FilterOnly}.train_applies_filter());
  CHECK_FALSE(VariantConfig{TrainingMode::FilterOnly}.train_applies_reward());
  CHECK(VariantConfig{TrainingMode::Dual}.train_applies_filter());
  CHECK(VariantConfig{TrainingMode::Dual}.train_applies_reward());
}

TEST_CASE("training is deterministic and logs what each variant does") {
  TrainConfig cfg = tiny_config();

  SUBCASE("fixed seed reproduces the curves bitwise") {
    VariantConfig dual{TrainingMode::Dual, false, false, "Dual (w/o rt. filt.)"};
    TrainResult a = train_variant(dual, cfg);
    TrainResult b = train_variant(dual, cfg);
    REQUIRE(a.curves.iterations.size() == b.curves.iterations.size());
    for (std::size_t i = 0; i < a.curves.iterations.size(); ++i) {
      CHECK(a.curves.iterations[i].mean_step_reward == b.curves.iterations[i].mean_step_reward);
      CHECK(a.curves.iterations[i].mean_cbf_reward == b.curves.iterations[i].mean_cbf_reward);
      CHECK(a.curves.iterations[i].policy_loss == b.curves.iterations[i].policy_loss);
    }
    Eigen::VectorXd fa(a.policy.mean_net.param_count()), fb(b.policy.mean_net.param_count());
    a.policy.mean_net.flatten(fa);
    b.policy.mean_net.flatten(fb);
    CHECK(fa == fb);
  }

  SUBCASE("nominal training never touches the filter or the cbf reward") {
    VariantConfig nominal{TrainingMode::Nominal, false, false, "Nominal"};
    TrainResult result = train_variant(nominal, cfg);
    for (const IterationMetrics& m : result.curves.iterations) {
      CHECK(m.filter_activation_rate == 0.0);
      CHECK(m.mean_cbf_reward == 0.0);
    }
  }

  SUBCASE("filter-only training reports zero cbf reward but nonzero activations") {
    VariantConfig filter_only{TrainingMode::FilterOnly, true, false, "Filter Only"};
    TrainResult result = train_variant(filter_only, cfg);
    double activation = 0.0;
    for (const IterationMetrics& m : result.curves.iterations) {
      CHECK(m.mean_cbf_reward == 0.0);
      activation += m.filter_activation_rate;
    }
    CHECK(activation > 0.0);
    CHECK(result.curves.total_obstacle_collisions == 0);
  }
}

TEST_CASE("evaluation") {
  EnvConfig env;
  FilterParams filter{1.0, 0.05};

  SUBCASE("scripted go-to-goal policy solves the empty world") {
    EnvConfig empty = env;
    empty.world.obstacle_count = 0;
    PolicyFn go = [&](const EnvState& s, const Eigen::VectorXd&) {
      Vec2 d = s.goal - s.q;
      double n = d.norm();
      return n > 0.0 ? Vec2(2.0 * d / n) : Vec2::Zero();
    };
    EvalReport report = evaluate_policy(go, empty, filter, 50, false, false, 11);
    CHECK(report.success_rate == doctest::Approx(1.0));
    CHECK(report.filter_activation_rate == 0.0);
  }

  SUBCASE("rates sum to one") {
    PolicyFn random_walk = [](const EnvState& s, const Eigen::VectorXd&) {
      // deterministic function of position, wanders into walls
      return Vec2{2.0 * std::sin(3.0 * s.q.x()), 2.0 * std::cos(3.0 * s.q.y())};
    };
    EvalReport report = evaluate_policy(random_walk, env, filter, 100, false, false, 12);
    CHECK(report.success_rate + report.collision_rate() + report.timeout_rate ==
          doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("identical seeds and flags give identical reports") {
    PolicyFn go = [](const EnvState& s, const Eigen::VectorXd&) {
      Vec2 d = s.goal - s.q;
      double n = d.norm();
      return n > 0.0 ? Vec2(2.0 * d / n) : Vec2::Zero();
    };
    EvalReport a = evaluate_policy(go, env, filter, 60, true, false, 13);
    EvalReport b = evaluate_policy(go, env, filter, 60, true, false, 13);
    CHECK(a.success_rate == b.success_rate);
    CHECK(a.mean_min_h == b.mean_min_h);
    CHECK(a.filter_activation_rate == b.filter_activation_rate);
  }

  SUBCASE("runtime filter keeps an adversarial policy collision free") {
    // head straight for the nearest obstacle
    PolicyFn adversary = [](const EnvState& s, const Eigen::VectorXd&) {
      double best = 1e9;
      Vec2 target = s.goal;
      for (const Obstacle& ob : s.world.obstacles) {
        double d = (ob.center - s.q).norm();
        if (d < best) {
          best = d;
          target = ob.center;
        }
      }
      Vec2 dir = target - s.q;
      double n = dir.norm();
      return n > 0.0 ? Vec2(2.0 * dir / n) : Vec2::Zero();
    };
    EvalReport report = evaluate_policy(adversary, env, filter, 100, true, false, 14);
    CHECK(report.obstacle_collision_rate == 0.0);
    CHECK(report.wall_collision_rate == 0.0);
    CHECK(report.filter_activation_rate > 0.1);
  }
}

TEST_CASE("filtered training stays above the dtcbf floor") {
  // 50 filtered episodes with a policy that dives at obstacles; the minimum
  // h along every trajectory must respect the asymptotic theorem bound.
  EnvConfig env;
  FilterParams filter{1.0, 0.05};
  WorldSpec world;
  world.side_length = 10.0;
  world.agent_radius = 0.3;
  world.obstacles = {{{5.0, 5.0}, 1.0}};

  ControllerFn closed_loop = [&](const Vec2& q) {
    Vec2 toward = world.obstacles[0].center - q;
    double n = toward.norm();
    Vec2 v = n > 0.0 ? Vec2(2.0 * toward / n) : Vec2::Zero();
    return filter_action(eval_composite(world, q), filter, v).v_safe;
  };
  Box2 region{{1.0, 1.0}, {9.0, 9.0}};
  double mu_hat = 2.0 * estimate_remainder_mu(world, region, closed_loop, filter.dt, 50000, 4);
  const double floor = -mu_hat / (filter.dt * filter.alpha) - 1e-6;

  Rng rng = make_rng(15, 0);
  double min_h = 1e9;
  for (int ep = 0; ep < 50; ++ep) {
    Vec2 q{uniform(rng, 1.0, 9.0), uniform(rng, 1.0, 9.0)};
    if (eval_composite(world, q).value < 0.2) continue;
    for (int k = 0; k < 200; ++k) {
      q += filter.dt * closed_loop(q);
      min_h = std::min(min_h, eval_composite(world, q).value);
    }
  }
  CHECK(min_h >= floor);
  CHECK(min_h >= 0.0);  // convex obstacle: the filter never lets h cross zero
}

TEST_CASE("run config round trip and hashing") {
  RunConfig cfg;
  cfg.variant.training_mode = TrainingMode::Dual;
  cfg.variant.label = variant_label(TrainingMode::Dual, false, false);

  Json canonical = cfg.to_json();
  RunConfig reparsed = RunConfig::from_json(canonical);
  CHECK(reparsed.to_json() == canonical);
  CHECK(config_hash(canonical) == config_hash(reparsed.to_json()));

  SUBCASE("unknown keys are rejected") {
    Json bad = canonical;
    bad["env"]["topology"] = "torus";
    CHECK_THROWS_AS(RunConfig::from_json(bad), std::invalid_argument);
    Json bad_top = canonical;
    bad_top["environment"] = Json::object();
    CHECK_THROWS_AS(RunConfig::from_json(bad_top), std::invalid_argument);
  }

  SUBCASE("partial configs take defaults") {
    Json partial = {{"train", {{"seed", 9}}}};
    RunConfig parsed = RunConfig::from_json(partial);
    CHECK(parsed.train.seed == 9);
    CHECK(parsed.env.v_max == doctest::Approx(2.0));
    CHECK(parsed.filter.alpha == doctest::Approx(parsed.env.alpha));
  }

  SUBCASE("overrides change the hash") {
    RunConfig other = cfg;
    other.variant.dr = true;
    CHECK(config_hash(other.to_json()) != config_hash(cfg.to_json()));
  }

  SUBCASE("world spec serialization round trips") {
    WorldSpec world;
    world.side_length = 10.0;
    world.agent_radius = 0.3;
    world.obstacles = {{{5.0, 5.0}, 1.0}, {{2.0, 7.5}, 0.75}};
    WorldSpec back = world_from_json(world_to_json(world));
    CHECK(back.side_length == world.side_length);
    REQUIRE(back.obstacles.size() == 2);
    CHECK(back.obstacles[1].center == world.obstacles[1].center);
    CHECK(back.obstacles[1].radius == world.obstacles[1].radius);
  }
}
