#include "ridepool/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "ridepool/common.hpp"

namespace ridepool {
namespace {

void leaky_inplace(Eigen::MatrixXd& z) {
  z = z.unaryExpr([](double v) { return v > 0.0 ? v : kLeakySlope * v; });
}

Eigen::MatrixXd leaky_grad_mask(const Eigen::MatrixXd& z) {
  return z.unaryExpr([](double v) { return v > 0.0 ? 1.0 : kLeakySlope; });
}

template <typename Mats, typename Vecs>
double& flat_param(Mats& w, Vecs& b, size_t k) {
  for (size_t l = 0; l < w.size(); ++l) {
    const size_t nw = static_cast<size_t>(w[l].size());
    if (k < nw) {
      const auto cols = static_cast<size_t>(w[l].cols());
      return w[l](static_cast<Eigen::Index>(k / cols), static_cast<Eigen::Index>(k % cols));
    }
    k -= nw;
    const size_t nb = static_cast<size_t>(b[l].size());
    if (k < nb) return b[l](static_cast<Eigen::Index>(k));
    k -= nb;
  }
  throw Error(ErrorCode::kInvalidArgument, "parameter index out of range");
}

}  // namespace

Mlp::Mlp(std::vector<int> sizes) : sizes_(std::move(sizes)) {
  if (sizes_.size() < 2 || sizes_.back() != 1) {
    throw Error(ErrorCode::kShapeMismatch, "Mlp needs >= 2 layer sizes ending in 1");
  }
  for (size_t l = 0; l + 1 < sizes_.size(); ++l) {
    if (sizes_[l] < 1) throw Error(ErrorCode::kShapeMismatch, "Mlp layer size < 1");
    weights_.push_back(Eigen::MatrixXd::Zero(sizes_[l + 1], sizes_[l]));
    biases_.push_back(Eigen::VectorXd::Zero(sizes_[l + 1]));
  }
}

Mlp Mlp::he_uniform(std::vector<int> sizes, uint64_t seed) {
  Mlp net(std::move(sizes));
  std::mt19937_64 rng(mix_seed(seed, 0x4D4C50));
  for (auto& w : net.weights_) {
    const double bound = std::sqrt(6.0 / static_cast<double>(w.cols()));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = u(rng);
    }
  }
  return net;
}

size_t Mlp::parameter_count() const {
  size_t n = 0;
  for (size_t l = 0; l < weights_.size(); ++l) {
    n += static_cast<size_t>(weights_[l].size() + biases_[l].size());
  }
  return n;
}

double Mlp::forward(std::span<const double> x) const {
  if (x.size() != static_cast<size_t>(input_dim())) {
    throw Error(ErrorCode::kShapeMismatch, "Mlp::forward: input dimension " +
                                               std::to_string(x.size()) + " != " +
                                               std::to_string(input_dim()));
  }
  Eigen::MatrixXd in = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  return forward_batch(in)(0);
}

Eigen::RowVectorXd Mlp::forward_batch(const Eigen::MatrixXd& inputs) const {
  if (inputs.rows() != input_dim()) {
    throw Error(ErrorCode::kShapeMismatch, "Mlp::forward_batch: input dimension mismatch");
  }
  Eigen::MatrixXd a = inputs;
  for (size_t l = 0; l < weights_.size(); ++l) {
    Eigen::MatrixXd z = weights_[l] * a;
    z.colwise() += biases_[l];
    if (l + 1 < weights_.size()) leaky_inplace(z);
    a = std::move(z);
  }
  return a.row(0);
}

void Mlp::backward_batch(const Eigen::MatrixXd& inputs, const Eigen::RowVectorXd& d_output,
                         MlpGrads& grads) const {
  if (inputs.rows() != input_dim() || d_output.size() != inputs.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "Mlp::backward_batch: shape mismatch");
  }
  if (grads.weights.size() != weights_.size()) {
    throw Error(ErrorCode::kShapeMismatch, "Mlp::backward_batch: gradient shape mismatch");
  }
  const size_t n_layers = weights_.size();
  std::vector<Eigen::MatrixXd> activations;  // input to layer l
  std::vector<Eigen::MatrixXd> pre;          // pre-activation of layer l
  activations.reserve(n_layers);
  pre.reserve(n_layers);
  activations.push_back(inputs);
  for (size_t l = 0; l < n_layers; ++l) {
    Eigen::MatrixXd z = weights_[l] * activations.back();
    z.colwise() += biases_[l];
    pre.push_back(z);
    if (l + 1 < n_layers) {
      leaky_inplace(z);
      activations.push_back(std::move(z));
    }
  }

  Eigen::MatrixXd delta = d_output;  // 1 x B
  for (size_t l = n_layers; l-- > 0;) {
    if (l + 1 < n_layers) delta = delta.cwiseProduct(leaky_grad_mask(pre[l]));
    grads.weights[l].noalias() += delta * activations[l].transpose();
    grads.biases[l] += delta.rowwise().sum();
    if (l > 0) delta = weights_[l].transpose() * delta;
  }
}

double& Mlp::param(size_t k) { return flat_param(weights_, biases_, k); }

bool Mlp::all_finite() const {
  for (size_t l = 0; l < weights_.size(); ++l) {
    if (!weights_[l].allFinite() || !biases_[l].allFinite()) return false;
  }
  return true;
}

MlpGrads MlpGrads::zeros_like(const Mlp& net) {
  MlpGrads g;
  for (int l = 0; l < net.layers(); ++l) {
    g.weights.push_back(Eigen::MatrixXd::Zero(net.weight(l).rows(), net.weight(l).cols()));
    g.biases.push_back(Eigen::VectorXd::Zero(net.bias(l).size()));
  }
  return g;
}

void MlpGrads::set_zero() {
  for (auto& w : weights) w.setZero();
  for (auto& b : biases) b.setZero();
}

double& MlpGrads::param(size_t k) { return flat_param(weights, biases, k); }

MlpGrads& MlpGrads::operator+=(const MlpGrads& other) {
  for (size_t l = 0; l < weights.size(); ++l) {
    weights[l] += other.weights[l];
    biases[l] += other.biases[l];
  }
  return *this;
}

Adam::Adam(const Mlp& net, AdamConfig cfg)
    : cfg_(cfg),
      lr_(cfg.learning_rate),
      m_(MlpGrads::zeros_like(net)),
      v_(MlpGrads::zeros_like(net)) {}

void Adam::step(Mlp& net, const MlpGrads& grads) {
  if (grads.weights.size() != m_.weights.size()) {
    throw Error(ErrorCode::kShapeMismatch, "Adam::step: gradient shape mismatch");
  }
  ++t_;
  const double b1 = cfg_.beta1;
  const double b2 = cfg_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double eps = cfg_.epsilon;
  const double lr = lr_;
  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    param -= (lr * (m / c1).array() / ((v / c2).array().sqrt() + eps)).matrix();
  };
  for (int l = 0; l < net.layers(); ++l) {
    update(net.weight(l), m_.weights[l], v_.weights[l], grads.weights[l]);
    update(net.bias(l), m_.biases[l], v_.biases[l], grads.biases[l]);
  }
}

std::optional<PolicyDistribution> masked_softmax(std::span<const double> scores,
                                                 std::span<const uint8_t> feasible) {
  if (scores.size() != feasible.size()) {
    throw Error(ErrorCode::kShapeMismatch, "masked_softmax: mask size mismatch");
  }
  PolicyDistribution d;
  for (size_t k = 0; k < scores.size(); ++k) {
    if (feasible[k]) {
      d.candidates.push_back(static_cast<int>(k));
      d.probs.push_back(scores[k]);
    }
  }
  if (d.candidates.empty()) return std::nullopt;
  softmax_inplace(d.probs);
  return d;
}

void softmax_inplace(std::span<double> v) {
  if (v.empty()) return;
  const double mx = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (double& x : v) {
    x = std::exp(x - mx);
    sum += x;
  }
  for (double& x : v) x /= sum;
}

}  // namespace ridepool
