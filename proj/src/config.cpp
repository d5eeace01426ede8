#include "cbfrl/config.hpp"

#include <cstdio>
#include <stdexcept>

namespace cbfrl {

namespace {

void reject_unknown_keys(const Json& j, const std::vector<std::string>& allowed,
                         const std::string& scope) {
  if (!j.is_object()) throw std::invalid_argument("config: '" + scope + "' must be an object");
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (const std::string& k : allowed) {
      if (key == k) {
        known = true;
        break;
      }
    }
    if (!known) throw std::invalid_argument("config: unknown key '" + scope + "." + key + "'");
  }
}

template <typename T>
void read(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

std::string variant_label(TrainingMode mode, bool runtime_filter, bool dr) {
  std::string label;
  switch (mode) {
    case TrainingMode::Nominal: label = "Nominal"; break;
    case TrainingMode::RewardOnly: label = "Reward Only"; break;
    case TrainingMode::FilterOnly: label = "Filter Only"; break;
    case TrainingMode::Dual: label = "Dual"; break;
  }
  const bool filterable = mode == TrainingMode::FilterOnly || mode == TrainingMode::Dual;
  if (filterable && !runtime_filter) label += " (w/o rt. filt.)";
  if (dr) label += " DR";
  return label;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig cfg;
  cfg.num_envs = train.num_envs;
  cfg.num_iterations = train.iterations;
  cfg.steps_per_iteration = train.steps_per_iteration;
  cfg.seed = train.seed;
  cfg.eval_episodes = train.eval_episodes;
  cfg.env = env;
  cfg.ppo = ppo;
  cfg.filter = filter;
  return cfg;
}

Json RunConfig::to_json() const {
  Json j;
  j["env"] = {{"world",
               {{"side_length", env.world.side_length},
                {"agent_radius", env.world.agent_radius},
                {"obstacle_count", env.world.obstacle_count},
                {"obstacle_radius_min", env.world.obstacle_radius_min},
                {"obstacle_radius_max", env.world.obstacle_radius_max},
                {"min_clearance", env.world.min_clearance}}},
              {"dt", env.dt},
              {"v_max", env.v_max},
              {"horizon", env.horizon},
              {"goal_radius", env.goal_radius},
              {"init_margin", env.init_margin},
              {"dr_enabled", env.dr_enabled},
              {"dr_scale", env.dr_scale},
              {"cbf_weight", env.cbf_weight},
              {"cbf_sigma", env.cbf_sigma},
              {"alpha", env.alpha},
              {"cbf_margin_bonus", env.cbf_margin_bonus}};
  j["ppo"] = {{"gamma", ppo.gamma},
              {"gae_lambda", ppo.gae_lambda},
              {"clip_epsilon", ppo.clip_epsilon},
              {"learning_rate", ppo.learning_rate},
              {"epochs", ppo.epochs},
              {"minibatch_size", ppo.minibatch_size},
              {"entropy_coef", ppo.entropy_coef},
              {"value_coef", ppo.value_coef},
              {"grad_norm_cap", ppo.grad_norm_cap},
              {"hidden", ppo.hidden}};
  j["filter"] = {{"alpha", filter.alpha}, {"dt", filter.dt}};
  j["train"] = {{"num_envs", train.num_envs},
                {"iterations", train.iterations},
                {"steps_per_iteration", train.steps_per_iteration},
                {"seed", train.seed},
                {"eval_episodes", train.eval_episodes}};
  j["variant"] = {{"training_mode", to_string(variant.training_mode)},
                  {"runtime_filter", variant.deploy_runtime_filter},
                  {"dr", variant.dr},
                  {"label", variant.label}};
  return j;
}

RunConfig RunConfig::from_json(const Json& j) {
  RunConfig cfg;
  reject_unknown_keys(j, {"env", "ppo", "filter", "train", "variant"}, "");

  bool filter_given = j.contains("filter");

  if (j.contains("env")) {
    const Json& e = j.at("env");
    reject_unknown_keys(e,
                        {"world", "dt", "v_max", "horizon", "goal_radius", "init_margin",
                         "dr_enabled", "dr_scale", "cbf_weight", "cbf_sigma", "alpha",
                         "cbf_margin_bonus"},
                        "env");
    if (e.contains("world")) {
      const Json& w = e.at("world");
      reject_unknown_keys(w,
                          {"side_length", "agent_radius", "obstacle_count", "obstacle_radius_min",
                           "obstacle_radius_max", "min_clearance"},
                          "env.world");
      read(w, "side_length", cfg.env.world.side_length);
      read(w, "agent_radius", cfg.env.world.agent_radius);
      read(w, "obstacle_count", cfg.env.world.obstacle_count);
      read(w, "obstacle_radius_min", cfg.env.world.obstacle_radius_min);
      read(w, "obstacle_radius_max", cfg.env.world.obstacle_radius_max);
      read(w, "min_clearance", cfg.env.world.min_clearance);
    }
    read(e, "dt", cfg.env.dt);
    read(e, "v_max", cfg.env.v_max);
    read(e, "horizon", cfg.env.horizon);
    read(e, "goal_radius", cfg.env.goal_radius);
    read(e, "init_margin", cfg.env.init_margin);
    read(e, "dr_enabled", cfg.env.dr_enabled);
    read(e, "dr_scale", cfg.env.dr_scale);
    read(e, "cbf_weight", cfg.env.cbf_weight);
    read(e, "cbf_sigma", cfg.env.cbf_sigma);
    read(e, "alpha", cfg.env.alpha);
    read(e, "cbf_margin_bonus", cfg.env.cbf_margin_bonus);
  }

  if (j.contains("ppo")) {
    const Json& p = j.at("ppo");
    reject_unknown_keys(p,
                        {"gamma", "gae_lambda", "clip_epsilon", "learning_rate", "epochs",
                         "minibatch_size", "entropy_coef", "value_coef", "grad_norm_cap", "hidden"},
                        "ppo");
    read(p, "gamma", cfg.ppo.gamma);
    read(p, "gae_lambda", cfg.ppo.gae_lambda);
    read(p, "clip_epsilon", cfg.ppo.clip_epsilon);
    read(p, "learning_rate", cfg.ppo.learning_rate);
    read(p, "epochs", cfg.ppo.epochs);
    read(p, "minibatch_size", cfg.ppo.minibatch_size);
    read(p, "entropy_coef", cfg.ppo.entropy_coef);
    read(p, "value_coef", cfg.ppo.value_coef);
    read(p, "grad_norm_cap", cfg.ppo.grad_norm_cap);
    read(p, "hidden", cfg.ppo.hidden);
  }

  if (j.contains("train")) {
    const Json& t = j.at("train");
    reject_unknown_keys(
        t, {"num_envs", "iterations", "steps_per_iteration", "seed", "eval_episodes"}, "train");
    read(t, "num_envs", cfg.train.num_envs);
    read(t, "iterations", cfg.train.iterations);
    read(t, "steps_per_iteration", cfg.train.steps_per_iteration);
    read(t, "seed", cfg.train.seed);
    read(t, "eval_episodes", cfg.train.eval_episodes);
  }

  if (j.contains("variant")) {
    const Json& v = j.at("variant");
    reject_unknown_keys(v, {"training_mode", "runtime_filter", "dr", "label"}, "variant");
    std::string mode = to_string(cfg.variant.training_mode);
    read(v, "training_mode", mode);
    cfg.variant.training_mode = training_mode_from_string(mode);
    read(v, "runtime_filter", cfg.variant.deploy_runtime_filter);
    read(v, "dr", cfg.variant.dr);
    if (v.contains("label")) {
      cfg.variant.label = v.at("label").get<std::string>();
    } else {
      cfg.variant.label = variant_label(cfg.variant.training_mode,
                                        cfg.variant.deploy_runtime_filter, cfg.variant.dr);
    }
  } else {
    cfg.variant.label =
        variant_label(cfg.variant.training_mode, cfg.variant.deploy_runtime_filter, cfg.variant.dr);
  }

  // the filter defaults mirror the environment unless given explicitly
  if (filter_given) {
    const Json& f = j.at("filter");
    reject_unknown_keys(f, {"alpha", "dt"}, "filter");
    cfg.filter.alpha = cfg.env.alpha;
    cfg.filter.dt = cfg.env.dt;
    read(f, "alpha", cfg.filter.alpha);
    read(f, "dt", cfg.filter.dt);
  } else {
    cfg.filter.alpha = cfg.env.alpha;
    cfg.filter.dt = cfg.env.dt;
  }
  return cfg;
}

std::string config_hash(const Json& canonical) {
  const std::string s = canonical.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

Json world_to_json(const WorldSpec& world) {
  Json obstacles = Json::array();
  for (const Obstacle& ob : world.obstacles) {
    obstacles.push_back({{"center", {ob.center.x(), ob.center.y()}}, {"radius", ob.radius}});
  }
  return {{"side_length", world.side_length},
          {"agent_radius", world.agent_radius},
          {"obstacles", obstacles}};
}

WorldSpec world_from_json(const Json& j) {
  reject_unknown_keys(j, {"side_length", "agent_radius", "obstacles"}, "world");
  WorldSpec world;
  read(j, "side_length", world.side_length);
  read(j, "agent_radius", world.agent_radius);
  if (j.contains("obstacles")) {
    for (const Json& o : j.at("obstacles")) {
      reject_unknown_keys(o, {"center", "radius"}, "world.obstacles[]");
      Obstacle ob;
      ob.center = {o.at("center").at(0).get<double>(), o.at("center").at(1).get<double>()};
      ob.radius = o.at("radius").get<double>();
      world.obstacles.push_back(ob);
    }
  }
  world.validate();
  return world;
}

}  // namespace cbfrl
