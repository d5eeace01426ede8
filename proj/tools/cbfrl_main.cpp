#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "cbfrl/checkpoint.hpp"
#include "cbfrl/config.hpp"
#include "cbfrl/experiment.hpp"
#include "cbfrl/metrics_io.hpp"
#include "cbfrl/verify.hpp"

namespace fs = std::filesystem;
using cbfrl::Json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int line_of_byte(const std::string& text, std::size_t byte) {
  int line = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

cbfrl::RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& ex) {
    throw ConfigError(path + ":" + std::to_string(line_of_byte(text, ex.byte)) + ": " + ex.what());
  }
  try {
    return cbfrl::RunConfig::from_json(j);
  } catch (const std::exception& ex) {
    throw ConfigError(path + ": " + ex.what());
  }
}

std::string resolve_out_dir(const std::string& flag_value, const std::string& fallback) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("CBFRL_OUT_DIR"); env != nullptr && *env != '\0') return env;
  return fallback;
}

void print_suite(const cbfrl::SuiteResult& suite) {
  for (const cbfrl::CheckResult& check : suite.checks) {
    std::cout << (check.pass ? "ok   " : "FAIL ") << suite.suite << "/" << check.name << " - "
              << check.detail << "\n";
  }
}

int cmd_train(const std::string& config_path, const std::string& out_flag,
              const std::vector<std::string>& overrides) {
  cbfrl::RunConfig cfg = config_path.empty() ? cbfrl::RunConfig{} : load_config(config_path);

  for (const std::string& ov : overrides) {
    auto eq = ov.find('=');
    if (eq == std::string::npos) throw ConfigError("override must be key=value: " + ov);
    const std::string key = ov.substr(0, eq);
    const std::string value = ov.substr(eq + 1);
    try {
      if (key == "variant") {
        cfg.variant.training_mode = cbfrl::training_mode_from_string(value);
      } else if (key == "dr") {
        cfg.variant.dr = value == "true" || value == "1" || value == "yes";
      } else if (key == "runtime_filter") {
        cfg.variant.deploy_runtime_filter = value == "true" || value == "1" || value == "yes";
      } else if (key == "seed") {
        cfg.train.seed = std::stoull(value);
      } else if (key == "iterations") {
        cfg.train.iterations = std::stoi(value);
      } else if (key == "num_envs") {
        cfg.train.num_envs = std::stoi(value);
      } else if (key == "steps_per_iteration") {
        cfg.train.steps_per_iteration = std::stoi(value);
      } else if (key == "eval_episodes") {
        cfg.train.eval_episodes = std::stoi(value);
      } else {
        throw ConfigError("unknown override key: " + key);
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      throw ConfigError("bad override value: " + ov);
    }
  }
  cfg.variant.label = cbfrl::variant_label(cfg.variant.training_mode,
                                           cfg.variant.deploy_runtime_filter, cfg.variant.dr);

  cbfrl::TrainConfig train_cfg = cfg.train_config();
  try {
    train_cfg.validate();
  } catch (const std::exception& ex) {
    throw ConfigError(ex.what());
  }

  const std::string out_dir = resolve_out_dir(out_flag, "cbfrl_out/train");
  fs::create_directories(out_dir);
  const Json canonical = cfg.to_json();
  cbfrl::write_manifest(out_dir, "train", canonical);

  cbfrl::JsonlWriter metrics((fs::path(out_dir) / "metrics.jsonl").string());
  std::cerr << "training " << cfg.variant.label << " (seed " << cfg.train.seed << ", "
            << cfg.train.iterations << " iterations x " << cfg.train.num_envs << " envs)\n";

  cbfrl::TrainResult result =
      cbfrl::train_variant(cfg.variant, train_cfg, [&](const cbfrl::IterationMetrics& m) {
        metrics.write(cbfrl::to_json(m));
        if ((m.iteration + 1) % 100 == 0) {
          std::cerr << "  iter " << m.iteration + 1 << ": reward/step " << m.mean_step_reward
                    << ", goals " << m.goals << ", collisions "
                    << m.obstacle_collisions + m.wall_collisions << "\n";
        }
      });

  cbfrl::Checkpoint ckpt{result.policy, result.value, canonical, cbfrl::config_hash(canonical),
                         static_cast<long>(cfg.train.iterations)};
  cbfrl::save_checkpoint((fs::path(out_dir) / "checkpoint.json").string(), ckpt);

  Json summary = {{"label", cfg.variant.label},
                  {"config_hash", cbfrl::config_hash(canonical)},
                  {"iterations", cfg.train.iterations},
                  {"total_episodes", result.curves.total_episodes},
                  {"total_goals", result.curves.total_goals},
                  {"total_obstacle_collisions", result.curves.total_obstacle_collisions},
                  {"total_wall_collisions", result.curves.total_wall_collisions},
                  {"total_timeouts", result.curves.total_timeouts}};
  std::ofstream summary_out(fs::path(out_dir) / "train_summary.json");
  summary_out << summary.dump(1) << "\n";
  std::cout << summary.dump() << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& checkpoint_path, int episodes, bool runtime_filter, bool dr,
             std::uint64_t seed, const std::string& out_flag, const std::string& export_prefix,
             bool scripted, const std::string& config_path) {
  cbfrl::RunConfig cfg;
  cbfrl::Checkpoint ckpt;
  if (scripted) {
    if (!config_path.empty()) cfg = load_config(config_path);
  } else {
    if (checkpoint_path.empty()) throw ConfigError("eval: --checkpoint is required");
    try {
      ckpt = cbfrl::load_checkpoint(checkpoint_path);
      cfg = cbfrl::RunConfig::from_json(ckpt.config);
    } catch (const std::exception& ex) {
      throw ConfigError(ex.what());
    }
  }

  const std::string out_dir = resolve_out_dir(out_flag, "cbfrl_out/eval");
  fs::create_directories(out_dir);
  Json eval_config = cfg.to_json();
  eval_config["eval"] = {{"episodes", episodes},
                         {"runtime_filter", runtime_filter},
                         {"dr", dr},
                         {"seed", seed},
                         {"scripted", scripted}};
  cbfrl::write_manifest(out_dir, "eval", eval_config);

  std::optional<cbfrl::JsonlWriter> traj_jsonl;
  std::ofstream traj_csv;
  cbfrl::StepLogger logger = nullptr;
  if (!export_prefix.empty()) {
    traj_jsonl.emplace(export_prefix + ".jsonl");
    traj_csv.open(export_prefix + ".csv");
    if (!traj_csv) throw ConfigError("eval: cannot open " + export_prefix + ".csv");
    traj_csv << cbfrl::trajectory_csv_header() << "\n";
    logger = [&](const cbfrl::StepRecord& rec) {
      traj_jsonl->write(cbfrl::to_json(rec));
      traj_csv << cbfrl::trajectory_csv_row(rec) << "\n";
    };
  }

  cbfrl::EvalReport report;
  if (scripted) {
    cbfrl::PolicyFn go_to_goal = [&](const cbfrl::EnvState& state, const Eigen::VectorXd&) {
      cbfrl::Vec2 to_goal = state.goal - state.q;
      double dist = to_goal.norm();
      return dist > 0.0 ? cbfrl::Vec2(cfg.env.v_max * to_goal / dist) : cbfrl::Vec2::Zero();
    };
    report = cbfrl::evaluate_policy(go_to_goal, cfg.env, cfg.filter, episodes, runtime_filter, dr,
                                    seed, logger);
  } else {
    report = cbfrl::evaluate(ckpt.policy, cfg.env, cfg.filter, episodes, runtime_filter, dr, seed,
                             logger);
  }

  Json out = cbfrl::to_json(report);
  std::ofstream report_out(fs::path(out_dir) / "report.json");
  report_out << out.dump(1) << "\n";
  std::cout << out.dump() << "\n";
  return kExitOk;
}

int cmd_verify(const std::vector<std::string>& suites, const std::string& out_flag,
               const std::string& inject) {
  const std::string out_dir = resolve_out_dir(out_flag, "cbfrl_out/verify");
  cbfrl::write_manifest(out_dir, "verify",
                        Json{{"suites", suites}, {"inject", inject.empty() ? "none" : inject}});
  bool all_pass = true;
  for (const std::string& name : suites) {
    cbfrl::SuiteResult result;
    if (name == "filter") {
      result = cbfrl::run_filter_suite(100000, inject == "sign-flip");
    } else if (name == "barrier") {
      result = cbfrl::run_barrier_suite(10000);
    } else if (name == "bound") {
      result = cbfrl::run_bound_suite(out_dir);
    } else {
      throw ConfigError("unknown suite: " + name);
    }
    print_suite(result);
    all_pass = all_pass && result.pass();
  }
  std::cout << (all_pass ? "verify: all checks passed" : "verify: FAILURES detected") << "\n";
  return all_pass ? kExitOk : kExitCheckFailed;
}

int cmd_ablate(const std::string& config_path, const std::string& out_flag) {
  cbfrl::RunConfig cfg = config_path.empty() ? cbfrl::RunConfig{} : load_config(config_path);
  cbfrl::TrainConfig base = cfg.train_config();
  try {
    base.validate();
  } catch (const std::exception& ex) {
    throw ConfigError(ex.what());
  }

  const std::string out_dir = resolve_out_dir(out_flag, "cbfrl_out/ablate");
  fs::create_directories(out_dir);
  cbfrl::write_manifest(out_dir, "ablate", cfg.to_json());

  cbfrl::AblationTable table =
      cbfrl::ablation_matrix(base, [](const std::string& stage, const std::string& label) {
        std::cerr << "  " << stage << " " << label << "\n";
      });

  const std::string csv = cbfrl::ablation_to_csv(table);
  std::ofstream csv_out(fs::path(out_dir) / "ablation.csv");
  csv_out << csv;
  std::ofstream json_out(fs::path(out_dir) / "ablation.json");
  json_out << cbfrl::ablation_to_json(table).dump(1) << "\n";
  std::cout << csv;

  for (const cbfrl::AblationRow& row : table.rows) {
    if (row.failed) {
      std::cerr << "ablate: variant failed: " << row.variant.label << ": " << row.error << "\n";
      return kExitCheckFailed;
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CBF-RL: training-time safety filtering and barrier rewards on 2D navigation"};
  app.require_subcommand(1);

  std::string config_path, out_dir, checkpoint_path, export_prefix, inject;
  std::vector<std::string> overrides;
  std::vector<std::string> suites{"filter", "barrier", "bound"};
  int episodes = 1000;
  bool runtime_filter = false, dr = false, scripted = false;
  std::uint64_t seed = 1;

  CLI::App* train = app.add_subcommand("train", "Train one method variant");
  train->add_option("--config", config_path, "Run configuration JSON");
  train->add_option("--set", overrides, "Override, e.g. --set variant=dual --set dr=true");
  train->add_option("--out", out_dir, "Output directory");

  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint on random test environments");
  eval->add_option("--checkpoint", checkpoint_path, "Checkpoint file");
  eval->add_option("--episodes,-n", episodes, "Number of evaluation episodes");
  eval->add_flag("--runtime-filter", runtime_filter, "Apply the closed-form filter at deployment");
  eval->add_flag("--dr", dr, "Evaluate with dynamics-noise domain randomization");
  eval->add_option("--seed", seed, "Evaluation seed");
  eval->add_option("--out", out_dir, "Output directory");
  eval->add_option("--export", export_prefix, "Export per-step trajectories to PREFIX.{jsonl,csv}");
  eval->add_flag("--scripted", scripted, "Use the scripted go-to-goal policy (sanity oracle)");
  eval->add_option("--config", config_path, "Config for --scripted (defaults otherwise)");

  CLI::App* verify = app.add_subcommand("verify", "Run the verification suites");
  verify->add_option("--suite", suites, "Suites to run: filter, barrier, bound")
      ->check(CLI::IsMember({"filter", "barrier", "bound"}));
  verify->add_option("--out", out_dir, "Output directory for certificates");
  verify->add_option("--inject", inject, "Fault injection fixture (sign-flip)")
      ->check(CLI::IsMember({"sign-flip"}));

  CLI::App* ablate = app.add_subcommand("ablate", "Train and evaluate the 12-row method matrix");
  ablate->add_option("--config", config_path, "Run configuration JSON");
  ablate->add_option("--out", out_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (train->parsed()) return cmd_train(config_path, out_dir, overrides);
    if (eval->parsed())
      return cmd_eval(checkpoint_path, episodes, runtime_filter, dr, seed, out_dir, export_prefix,
                      scripted, config_path);
    if (verify->parsed()) return cmd_verify(suites, out_dir, inject);
    if (ablate->parsed()) return cmd_ablate(config_path, out_dir);
  } catch (const ConfigError& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitCheckFailed;
  }
  return kExitUsage;
}
