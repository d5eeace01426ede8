#pragma once

#include <Eigen/Dense>
#include <vector>

#include "cbfrl/rng.hpp"

namespace cbfrl {

// Dense tanh MLP in double precision. Samples are matrix columns, so a
// forward pass over a batch is one GEMM per layer. The last layer is linear.
class Mlp {
 public:
  Mlp() = default;

  // sizes = [input, hidden..., output]; Xavier-uniform weights, zero biases.
  // The final layer is scaled by `last_layer_scale`.
  static Mlp create(const std::vector<int>& sizes, Rng& rng, double last_layer_scale = 1.0);

  Eigen::MatrixXd forward(const Eigen::MatrixXd& input) const;

  struct Cache {
    std::vector<Eigen::MatrixXd> activations;  // [0]=input, [l]=post-layer-l
  };
  Eigen::MatrixXd forward_cached(const Eigen::MatrixXd& input, Cache& cache) const;

  // Accumulates parameter gradients for d(loss)/d(output) into `grads`
  // (an Mlp of identical shape, typically zero-initialized).
  void backward(const Cache& cache, const Eigen::MatrixXd& output_grad, Mlp& grads) const;

  Mlp zeros_like() const;

  int input_dim() const { return weights_.empty() ? 0 : static_cast<int>(weights_.front().cols()); }
  int output_dim() const { return weights_.empty() ? 0 : static_cast<int>(weights_.back().rows()); }
  const std::vector<int>& layer_sizes() const { return sizes_; }
  bool all_finite() const;

  int param_count() const;
  void flatten(Eigen::Ref<Eigen::VectorXd> out) const;
  void unflatten(const Eigen::Ref<const Eigen::VectorXd>& in);

  std::vector<Eigen::MatrixXd>& weights() { return weights_; }
  std::vector<Eigen::VectorXd>& biases() { return biases_; }
  const std::vector<Eigen::MatrixXd>& weights() const { return weights_; }
  const std::vector<Eigen::VectorXd>& biases() const { return biases_; }

 private:
  std::vector<int> sizes_;
  std::vector<Eigen::MatrixXd> weights_;  // [l]: out x in
  std::vector<Eigen::VectorXd> biases_;
};

}  // namespace cbfrl
