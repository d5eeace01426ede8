#include "cbfrl/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

namespace cbfrl {

namespace {

using Json = nlohmann::json;

Json mlp_to_json(const Mlp& net) {
  Json weights = Json::array();
  Json biases = Json::array();
  for (std::size_t l = 0; l < net.weights().size(); ++l) {
    const Eigen::MatrixXd& w = net.weights()[l];
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      Json row = Json::array();
      for (Eigen::Index j = 0; j < w.cols(); ++j) row.push_back(w(i, j));
      rows.push_back(std::move(row));
    }
    weights.push_back(std::move(rows));
    Json bias = Json::array();
    for (Eigen::Index i = 0; i < net.biases()[l].size(); ++i)
      bias.push_back(net.biases()[l](i));
    biases.push_back(std::move(bias));
  }
  return {{"layer_sizes", net.layer_sizes()}, {"weights", weights}, {"biases", biases}};
}

Mlp mlp_from_json(const Json& j) {
  std::vector<int> sizes = j.at("layer_sizes").get<std::vector<int>>();
  Rng rng(0);
  Mlp net = Mlp::create(sizes, rng);
  const Json& weights = j.at("weights");
  const Json& biases = j.at("biases");
  if (weights.size() != net.weights().size() || biases.size() != net.biases().size())
    throw std::runtime_error("checkpoint: layer count mismatch");
  for (std::size_t l = 0; l < net.weights().size(); ++l) {
    Eigen::MatrixXd& w = net.weights()[l];
    const Json& rows = weights.at(l);
    if (static_cast<Eigen::Index>(rows.size()) != w.rows())
      throw std::runtime_error("checkpoint: weight shape mismatch");
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      const Json& row = rows.at(i);
      if (static_cast<Eigen::Index>(row.size()) != w.cols())
        throw std::runtime_error("checkpoint: weight shape mismatch");
      for (Eigen::Index j2 = 0; j2 < w.cols(); ++j2) w(i, j2) = row.at(j2).get<double>();
    }
    Eigen::VectorXd& b = net.biases()[l];
    const Json& bias = biases.at(l);
    if (static_cast<Eigen::Index>(bias.size()) != b.size())
      throw std::runtime_error("checkpoint: bias shape mismatch");
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = bias.at(i).get<double>();
  }
  if (!net.all_finite()) throw std::runtime_error("checkpoint: non-finite parameters");
  return net;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  Json j;
  j["format"] = "cbfrl-checkpoint";
  j["version"] = 1;
  j["train_step"] = ckpt.train_step;
  j["config_hash"] = ckpt.config_hash;
  j["config"] = ckpt.config;
  Json policy = mlp_to_json(ckpt.policy.mean_net);
  Json log_std = Json::array();
  for (Eigen::Index i = 0; i < ckpt.policy.log_std.size(); ++i)
    log_std.push_back(ckpt.policy.log_std(i));
  policy["log_std"] = log_std;
  policy["v_max"] = ckpt.policy.v_max;
  j["policy"] = policy;
  j["value"] = mlp_to_json(ckpt.value.net);

  std::ofstream out(path);
  if (!out) throw std::runtime_error("checkpoint: cannot open for writing: " + path);
  out << j.dump(1);
  out << "\n";
  if (!out) throw std::runtime_error("checkpoint: write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("checkpoint: cannot open: " + path);
  Json j = Json::parse(in);
  if (j.value("format", "") != "cbfrl-checkpoint")
    throw std::runtime_error("checkpoint: unrecognized format: " + path);

  Checkpoint ckpt;
  ckpt.train_step = j.value("train_step", 0L);
  ckpt.config_hash = j.value("config_hash", "");
  if (j.contains("config")) ckpt.config = j.at("config");

  const Json& policy = j.at("policy");
  ckpt.policy.mean_net = mlp_from_json(policy);
  const Json& log_std = policy.at("log_std");
  ckpt.policy.log_std.resize(log_std.size());
  for (std::size_t i = 0; i < log_std.size(); ++i)
    ckpt.policy.log_std(static_cast<Eigen::Index>(i)) = log_std.at(i).get<double>();
  ckpt.policy.v_max = policy.at("v_max").get<double>();
  ckpt.value.net = mlp_from_json(j.at("value"));
  return ckpt;
}

}  // namespace cbfrl
