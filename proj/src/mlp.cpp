#include "cbfrl/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace cbfrl {

Mlp Mlp::create(const std::vector<int>& sizes, Rng& rng, double last_layer_scale) {
  if (sizes.size() < 2) throw std::invalid_argument("Mlp: need at least input and output sizes");
  Mlp net;
  net.sizes_ = sizes;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    int in = sizes[l], out = sizes[l + 1];
    if (in <= 0 || out <= 0) throw std::invalid_argument("Mlp: layer sizes must be positive");
    double limit = std::sqrt(6.0 / (in + out));
    if (l + 2 == sizes.size()) limit *= last_layer_scale;
    Eigen::MatrixXd w(out, in);
    for (int i = 0; i < out; ++i)
      for (int j = 0; j < in; ++j) w(i, j) = uniform(rng, -limit, limit);
    net.weights_.push_back(std::move(w));
    net.biases_.push_back(Eigen::VectorXd::Zero(out));
  }
  return net;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& input) const {
  if (input.rows() != input_dim()) throw std::invalid_argument("Mlp::forward: input dim mismatch");
  Eigen::MatrixXd a = input;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    a = (weights_[l] * a).colwise() + biases_[l];
    if (l + 1 < weights_.size()) a = a.array().tanh();
  }
  return a;
}

Eigen::MatrixXd Mlp::forward_cached(const Eigen::MatrixXd& input, Cache& cache) const {
  if (input.rows() != input_dim()) throw std::invalid_argument("Mlp::forward: input dim mismatch");
  cache.activations.clear();
  cache.activations.reserve(weights_.size() + 1);
  cache.activations.push_back(input);
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Eigen::MatrixXd a = (weights_[l] * cache.activations.back()).colwise() + biases_[l];
    if (l + 1 < weights_.size()) a = a.array().tanh();
    cache.activations.push_back(std::move(a));
  }
  return cache.activations.back();
}

void Mlp::backward(const Cache& cache, const Eigen::MatrixXd& output_grad, Mlp& grads) const {
  Eigen::MatrixXd delta = output_grad;
  for (int l = static_cast<int>(weights_.size()) - 1; l >= 0; --l) {
    grads.weights_[l].noalias() += delta * cache.activations[l].transpose();
    grads.biases_[l] += delta.rowwise().sum();
    if (l > 0) {
      // activations[l] is tanh output of layer l-1's successor
      delta = (weights_[l].transpose() * delta).eval().cwiseProduct(
          (1.0 - cache.activations[l].array().square()).matrix());
    }
  }
}

Mlp Mlp::zeros_like() const {
  Mlp z;
  z.sizes_ = sizes_;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    z.weights_.push_back(Eigen::MatrixXd::Zero(weights_[l].rows(), weights_[l].cols()));
    z.biases_.push_back(Eigen::VectorXd::Zero(biases_[l].size()));
  }
  return z;
}

bool Mlp::all_finite() const {
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    if (!weights_[l].allFinite() || !biases_[l].allFinite()) return false;
  }
  return true;
}

int Mlp::param_count() const {
  int n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l)
    n += static_cast<int>(weights_[l].size() + biases_[l].size());
  return n;
}

void Mlp::flatten(Eigen::Ref<Eigen::VectorXd> out) const {
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.segment(k, weights_[l].size()) =
        Eigen::Map<const Eigen::VectorXd>(weights_[l].data(), weights_[l].size());
    k += weights_[l].size();
    out.segment(k, biases_[l].size()) = biases_[l];
    k += biases_[l].size();
  }
}

void Mlp::unflatten(const Eigen::Ref<const Eigen::VectorXd>& in) {
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Eigen::Map<Eigen::VectorXd>(weights_[l].data(), weights_[l].size()) =
        in.segment(k, weights_[l].size());
    k += weights_[l].size();
    biases_[l] = in.segment(k, biases_[l].size());
    k += biases_[l].size();
  }
}

}  // namespace cbfrl
