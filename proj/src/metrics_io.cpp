#include "cbfrl/metrics_io.hpp"

#include <cstdio>
#include <filesystem>
#include <sstream>
#include <stdexcept>

#include "cbfrl/config.hpp"

namespace cbfrl {

namespace {

std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

JsonlWriter::JsonlWriter(const std::string& path) : out_(path) {
  if (!out_) throw std::runtime_error("JsonlWriter: cannot open " + path);
}

void JsonlWriter::write(const Json& row) {
  out_ << row.dump() << "\n";
  if (!out_) throw std::runtime_error("JsonlWriter: write failed");
}

Json to_json(const IterationMetrics& m) {
  return {{"iteration", m.iteration},
          {"mean_step_reward", m.mean_step_reward},
          {"mean_cbf_reward", m.mean_cbf_reward},
          {"filter_activation_rate", m.filter_activation_rate},
          {"episodes", m.episodes},
          {"goals", m.goals},
          {"obstacle_collisions", m.obstacle_collisions},
          {"wall_collisions", m.wall_collisions},
          {"timeouts", m.timeouts},
          {"mean_episode_return", m.mean_episode_return},
          {"mean_episode_length", m.mean_episode_length},
          {"mean_min_h", m.mean_min_h},
          {"policy_loss", m.policy_loss},
          {"value_loss", m.value_loss},
          {"entropy", m.entropy},
          {"approx_kl", m.approx_kl}};
}

Json to_json(const EvalReport& r) {
  return {{"n_episodes", r.n_episodes},
          {"success_rate", r.success_rate},
          {"obstacle_collision_rate", r.obstacle_collision_rate},
          {"wall_collision_rate", r.wall_collision_rate},
          {"collision_rate", r.collision_rate()},
          {"timeout_rate", r.timeout_rate},
          {"mean_episode_length", r.mean_episode_length},
          {"mean_min_h", r.mean_min_h},
          {"filter_activation_rate", r.filter_activation_rate}};
}

Json to_json(const CertificateReport& r) {
  Json entries = Json::array();
  for (const auto& e : r.entries) {
    entries.push_back({{"step", e.step}, {"h", e.h}, {"bound", e.bound}, {"slack", e.slack}});
  }
  return {{"mu", r.mu},        {"alpha", r.alpha}, {"dt", r.dt},
          {"pass", r.pass},    {"entries", entries}};
}

Json to_json(const StepRecord& rec) {
  return {{"episode", rec.episode},
          {"step", rec.step},
          {"q", {rec.q.x(), rec.q.y()}},
          {"v_policy", {rec.v_policy.x(), rec.v_policy.y()}},
          {"v_safe", {rec.v_safe.x(), rec.v_safe.y()}},
          {"v_exec", {rec.v_exec.x(), rec.v_exec.y()}},
          {"h", rec.h},
          {"rewards", rec.rewards.as_map()},
          {"terminal", to_string(rec.terminal)}};
}

std::string ablation_to_csv(const AblationTable& table) {
  std::ostringstream out;
  out << "label,training_mode,runtime_filter,dr,status,n_episodes,success_rate,"
         "obstacle_collision_rate,wall_collision_rate,timeout_rate,mean_episode_length,"
         "mean_min_h,filter_activation_rate,dr_delta\n";
  for (const AblationRow& row : table.rows) {
    out << '"' << row.variant.label << '"' << ',' << to_string(row.variant.training_mode) << ','
        << (row.variant.deploy_runtime_filter ? "yes" : "no") << ','
        << (row.variant.dr ? "yes" : "no") << ',' << (row.failed ? "failed" : "ok") << ',';
    if (row.failed) {
      out << "0,,,,,,,,";
    } else {
      const EvalReport& r = row.report;
      out << r.n_episodes << ',' << fmt9(r.success_rate) << ','
          << fmt9(r.obstacle_collision_rate) << ',' << fmt9(r.wall_collision_rate) << ','
          << fmt9(r.timeout_rate) << ',' << fmt9(r.mean_episode_length) << ','
          << fmt9(r.mean_min_h) << ',' << fmt9(r.filter_activation_rate) << ',';
      if (row.dr_delta) out << fmt9(*row.dr_delta);
    }
    out << "\n";
  }
  return out.str();
}

Json ablation_to_json(const AblationTable& table) {
  Json rows = Json::array();
  for (const AblationRow& row : table.rows) {
    Json r = {{"label", row.variant.label},
              {"training_mode", to_string(row.variant.training_mode)},
              {"runtime_filter", row.variant.deploy_runtime_filter},
              {"dr", row.variant.dr},
              {"status", row.failed ? "failed" : "ok"}};
    if (row.failed) {
      r["error"] = row.error;
    } else {
      r["report"] = to_json(row.report);
      if (row.dr_delta) r["dr_delta"] = *row.dr_delta;
    }
    rows.push_back(std::move(r));
  }
  return {{"rows", rows}};
}

StepLogger make_jsonl_step_logger(JsonlWriter& writer) {
  return [&writer](const StepRecord& rec) { writer.write(to_json(rec)); };
}

std::string trajectory_csv_header() {
  return "episode,step,q_x,q_y,v_policy_x,v_policy_y,v_safe_x,v_safe_y,v_exec_x,v_exec_y,h,"
         "r_goal,r_obstacle,r_wall,r_progress,r_alive,r_cbf,r_timeout,terminal";
}

std::string trajectory_csv_row(const StepRecord& rec) {
  std::ostringstream out;
  out << rec.episode << ',' << rec.step << ',' << fmt9(rec.q.x()) << ',' << fmt9(rec.q.y()) << ','
      << fmt9(rec.v_policy.x()) << ',' << fmt9(rec.v_policy.y()) << ',' << fmt9(rec.v_safe.x())
      << ',' << fmt9(rec.v_safe.y()) << ',' << fmt9(rec.v_exec.x()) << ',' << fmt9(rec.v_exec.y())
      << ',' << fmt9(rec.h) << ',' << fmt9(rec.rewards.goal) << ',' << fmt9(rec.rewards.obstacle)
      << ',' << fmt9(rec.rewards.wall) << ',' << fmt9(rec.rewards.progress) << ','
      << fmt9(rec.rewards.alive) << ',' << fmt9(rec.rewards.cbf) << ','
      << fmt9(rec.rewards.timeout) << ',' << to_string(rec.terminal);
  return out.str();
}

void write_certificate_jsonl(const std::string& path, const CertificateReport& report) {
  JsonlWriter writer(path);
  writer.write({{"mu", report.mu},
                {"alpha", report.alpha},
                {"dt", report.dt},
                {"pass", report.pass},
                {"steps", report.entries.size()}});
  for (const auto& e : report.entries) {
    writer.write({{"step", e.step}, {"h", e.h}, {"bound", e.bound}, {"slack", e.slack}});
  }
}

void write_manifest(const std::string& dir, const std::string& command, const Json& config) {
  std::filesystem::create_directories(dir);
  Json manifest = {{"tool", "cbfrl"},
                   {"version", kToolVersion},
                   {"command", command},
                   {"config_hash", config_hash(config)},
                   {"config", config}};
  std::ofstream out(std::filesystem::path(dir) / "manifest.json");
  if (!out) throw std::runtime_error("write_manifest: cannot open manifest in " + dir);
  out << manifest.dump(1) << "\n";
}

}  // namespace cbfrl
