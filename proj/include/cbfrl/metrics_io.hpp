#pragma once

#include <fstream>
#include <nlohmann/json.hpp>
#include <string>

#include "cbfrl/experiment.hpp"
#include "cbfrl/filter.hpp"

namespace cbfrl {

using Json = nlohmann::json;

// Append-only JSON-lines writer.
class JsonlWriter {
 public:
  explicit JsonlWriter(const std::string& path);
  void write(const Json& row);

 private:
  std::ofstream out_;
};

Json to_json(const IterationMetrics& m);
Json to_json(const EvalReport& r);
Json to_json(const CertificateReport& r);
Json to_json(const StepRecord& rec);

// Table-shaped ablation output. CSV uses 9 significant digits.
std::string ablation_to_csv(const AblationTable& table);
Json ablation_to_json(const AblationTable& table);

// Step loggers for trajectory export (one row per step, identical columns).
StepLogger make_jsonl_step_logger(JsonlWriter& writer);
std::string trajectory_csv_header();
std::string trajectory_csv_row(const StepRecord& rec);

// CertificateReport rows for the metrics log: step, h, bound, slack.
void write_certificate_jsonl(const std::string& path, const CertificateReport& report);

// Writes <dir>/manifest.json with the tool version, command, config and its
// hash. No timestamps, so reruns are byte-identical.
void write_manifest(const std::string& dir, const std::string& command, const Json& config);

constexpr const char* kToolVersion = "0.1.0";

}  // namespace cbfrl
