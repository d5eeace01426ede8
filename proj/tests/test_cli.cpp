#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

const std::string kCli = CBFRL_CLI_PATH;

struct CommandResult {
  int exit_code = -1;
  std::string output;
};

CommandResult run(const std::string& args, const fs::path& dir) {
  fs::path out_file = dir / "cmd_output.txt";
  std::string cmd = kCli + " " + args + " > " + out_file.string() + " 2>&1";
  int status = std::system(cmd.c_str());
  CommandResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(out_file);
  std::stringstream buf;
  buf << in.rdbuf();
  result.output = buf.str();
  return result;
}

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "cbfrl_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

std::string tiny_train_config(int iterations = 2) {
  Json j = {{"train",
             {{"num_envs", 8},
              {"iterations", iterations},
              {"steps_per_iteration", 16},
              {"seed", 3},
              {"eval_episodes", 4}}},
            {"ppo", {{"minibatch_size", 64}}}};
  return j.dump();
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TEST_CASE("cli: config errors exit with code 2") {
  fs::path dir = fresh_dir("config_errors");

  SUBCASE("missing config file") {
    CommandResult r = run("train --config " + (dir / "nope.json").string(), dir);
    CHECK(r.exit_code == 2);
  }

  SUBCASE("parse errors carry a line number") {
    fs::path cfg = dir / "broken.json";
    write_file(cfg, "{\n \"train\": {\n  \"seed\": oops\n }\n}\n");
    CommandResult r = run("train --config " + cfg.string(), dir);
    CHECK(r.exit_code == 2);
    CHECK(r.output.find(":3:") != std::string::npos);
  }

  SUBCASE("unknown keys are rejected") {
    fs::path cfg = dir / "unknown.json";
    write_file(cfg, "{\"training\": {}}");
    CommandResult r = run("train --config " + cfg.string(), dir);
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("unknown key") != std::string::npos);
  }

  SUBCASE("bad override") {
    CommandResult r = run("train --set nonsense=1 --out " + (dir / "o").string(), dir);
    CHECK(r.exit_code == 2);
  }
}

TEST_CASE("cli: train writes checkpoint, metrics, and manifest") {
  fs::path dir = fresh_dir("train");
  fs::path cfg = dir / "config.json";
  write_file(cfg, tiny_train_config());
  fs::path out = dir / "run";

  CommandResult r =
      run("train --config " + cfg.string() + " --out " + out.string(), dir);
  REQUIRE(r.exit_code == 0);
  CHECK(fs::exists(out / "checkpoint.json"));
  CHECK(fs::exists(out / "manifest.json"));
  CHECK(fs::exists(out / "metrics.jsonl"));

  Json manifest = Json::parse(slurp(out / "manifest.json"));
  CHECK(manifest.at("version") == "0.1.0");
  CHECK(manifest.at("config_hash").get<std::string>().size() == 16);

  // one metrics row per iteration
  std::ifstream metrics(out / "metrics.jsonl");
  int lines = 0;
  std::string line;
  while (std::getline(metrics, line))
    if (!line.empty()) ++lines;
  CHECK(lines == 2);

  SUBCASE("overrides are reflected in the config hash") {
    fs::path out2 = dir / "run2";
    CommandResult r2 = run("train --config " + cfg.string() +
                               " --set variant=dual --set dr=true --out " + out2.string(),
                           dir);
    REQUIRE(r2.exit_code == 0);
    Json m2 = Json::parse(slurp(out2 / "manifest.json"));
    CHECK(m2.at("config_hash") != manifest.at("config_hash"));
    CHECK(m2.at("config").at("variant").at("training_mode") == "dual");
    CHECK(m2.at("config").at("variant").at("dr") == true);
    CHECK(m2.at("config").at("variant").at("label") == "Dual (w/o rt. filt.) DR");
  }
}

TEST_CASE("cli: eval reports and reproducibility") {
  fs::path dir = fresh_dir("eval");
  fs::path cfg = dir / "config.json";
  write_file(cfg, tiny_train_config());
  fs::path train_out = dir / "run";
  REQUIRE(run("train --config " + cfg.string() + " --out " + train_out.string(), dir).exit_code ==
          0);
  const std::string ckpt = (train_out / "checkpoint.json").string();

  SUBCASE("report fields are complete and rates sum to one") {
    fs::path out = dir / "eval_out";
    CommandResult r = run("eval --checkpoint " + ckpt + " -n 20 --seed 4 --out " + out.string() +
                              " --export " + (dir / "traj").string(),
                          dir);
    REQUIRE(r.exit_code == 0);
    Json report = Json::parse(slurp(out / "report.json"));
    for (const char* key :
         {"n_episodes", "success_rate", "obstacle_collision_rate", "wall_collision_rate",
          "timeout_rate", "mean_episode_length", "mean_min_h", "filter_activation_rate"}) {
      CHECK(report.contains(key));
    }
    double total = report.at("success_rate").get<double>() +
                   report.at("obstacle_collision_rate").get<double>() +
                   report.at("wall_collision_rate").get<double>() +
                   report.at("timeout_rate").get<double>();
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

    // trajectory export: jsonl and csv with identical row counts
    std::ifstream jsonl(dir / "traj.jsonl");
    int json_rows = 0;
    std::string line;
    while (std::getline(jsonl, line))
      if (!line.empty()) ++json_rows;
    std::ifstream csv(dir / "traj.csv");
    int csv_rows = -1;  // header
    while (std::getline(csv, line))
      if (!line.empty()) ++csv_rows;
    CHECK(json_rows > 0);
    CHECK(json_rows == csv_rows);
    Json first_row = Json::parse(slurp(dir / "traj.jsonl").substr(0, slurp(dir / "traj.jsonl").find('\n')));
    CHECK(first_row.contains("q"));
    CHECK(first_row.contains("rewards"));
  }

  SUBCASE("repeated invocations produce identical reports") {
    fs::path out_a = dir / "eval_a";
    fs::path out_b = dir / "eval_b";
    REQUIRE(run("eval --checkpoint " + ckpt + " -n 15 --seed 6 --out " + out_a.string(), dir)
                .exit_code == 0);
    REQUIRE(run("eval --checkpoint " + ckpt + " -n 15 --seed 6 --out " + out_b.string(), dir)
                .exit_code == 0);
    CHECK(slurp(out_a / "report.json") == slurp(out_b / "report.json"));
  }

  SUBCASE("scripted sanity run reaches every goal in an empty world") {
    fs::path empty_cfg = dir / "empty.json";
    write_file(empty_cfg, R"({"env": {"world": {"obstacle_count": 0}}})");
    fs::path out = dir / "eval_scripted";
    CommandResult r = run("eval --scripted --config " + empty_cfg.string() + " -n 25 --out " +
                              out.string(),
                          dir);
    REQUIRE(r.exit_code == 0);
    Json report = Json::parse(slurp(out / "report.json"));
    CHECK(report.at("success_rate").get<double>() == doctest::Approx(1.0));
  }
}

TEST_CASE("cli: verify suites") {
  fs::path dir = fresh_dir("verify");

  SUBCASE("bound suite passes and emits a certificate") {
    fs::path out = dir / "bound_out";
    CommandResult r = run("verify --suite bound --out " + out.string(), dir);
    CHECK(r.exit_code == 0);
    CHECK(fs::exists(out / "bound_certificate.jsonl"));
    CHECK(fs::exists(out / "bound_world.json"));
  }

  SUBCASE("injected projection sign flip is detected") {
    CommandResult r = run("verify --suite filter --inject sign-flip", dir);
    CHECK(r.exit_code == 1);
    CHECK(r.output.find("FAIL") != std::string::npos);
  }
}

TEST_CASE("cli: ablate emits the 12-row table deterministically") {
  fs::path dir = fresh_dir("ablate");
  fs::path cfg = dir / "config.json";
  write_file(cfg, tiny_train_config(1));

  fs::path out_a = dir / "a";
  CommandResult r = run("ablate --config " + cfg.string() + " --out " + out_a.string(), dir);
  REQUIRE(r.exit_code == 0);

  std::string csv = slurp(out_a / "ablation.csv");
  int rows = -1;
  std::stringstream lines(csv);
  std::string line;
  std::vector<std::string> labels;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    if (rows >= 0) labels.push_back(line.substr(0, line.find("\",") + 1));
    ++rows;
  }
  CHECK(rows == 12);
  REQUIRE(labels.size() == 12);
  CHECK(labels[0] == "\"Nominal\"");
  CHECK(labels[2] == "\"Dual (w/o rt. filt.)\"");
  CHECK(labels[11] == "\"Filter Only (w/o rt. filt.) DR\"");

  // DR rows carry deltas
  Json table = Json::parse(slurp(out_a / "ablation.json"));
  int deltas = 0;
  for (const Json& row : table.at("rows")) {
    if (row.at("dr").get<bool>()) {
      CHECK(row.contains("dr_delta"));
      ++deltas;
    }
  }
  CHECK(deltas == 6);

  SUBCASE("rerun is byte-identical") {
    fs::path out_b = dir / "b";
    REQUIRE(run("ablate --config " + cfg.string() + " --out " + out_b.string(), dir).exit_code ==
            0);
    CHECK(slurp(out_b / "ablation.csv") == csv);
  }

  SUBCASE("a failing variant marks its row failed and exits nonzero") {
    fs::path bad_cfg = dir / "bad.json";
    Json j = Json::parse(tiny_train_config(1));
    j["ppo"]["value_coef"] = 1e308;
    write_file(bad_cfg, j.dump());
    fs::path out = dir / "failed";
    CommandResult r2 = run("ablate --config " + bad_cfg.string() + " --out " + out.string(), dir);
    CHECK(r2.exit_code == 1);
    std::string failed_csv = slurp(out / "ablation.csv");
    CHECK(failed_csv.find("failed") != std::string::npos);
  }
}
