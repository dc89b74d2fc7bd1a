#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace ridepool {

inline constexpr double kLeakySlope = 0.01;

struct MlpGrads;

// Fully connected network: affine -> LeakyReLU on hidden layers, linear
// scalar output. Layer l maps sizes[l] -> sizes[l+1]. Inputs are passed
// column-wise (one sample per column).
class Mlp {
 public:
  Mlp() = default;
  // Zero-initialised network.
  explicit Mlp(std::vector<int> sizes);
  // Uniform fan-in scaling, U(-sqrt(6/fan_in), sqrt(6/fan_in)) weights and
  // zero biases, drawn from a seeded stream.
  static Mlp he_uniform(std::vector<int> sizes, uint64_t seed);

  const std::vector<int>& sizes() const { return sizes_; }
  int input_dim() const { return sizes_.front(); }
  int layers() const { return static_cast<int>(weights_.size()); }
  size_t parameter_count() const;

  double forward(std::span<const double> x) const;
  Eigen::RowVectorXd forward_batch(const Eigen::MatrixXd& inputs) const;

  // Adds d(loss)/d(params) to `grads`, given d(loss)/d(output) per column.
  // Columns are reduced in index order.
  void backward_batch(const Eigen::MatrixXd& inputs, const Eigen::RowVectorXd& d_output,
                      MlpGrads& grads) const;

  Eigen::MatrixXd& weight(int l) { return weights_[l]; }
  const Eigen::MatrixXd& weight(int l) const { return weights_[l]; }
  Eigen::VectorXd& bias(int l) { return biases_[l]; }
  const Eigen::VectorXd& bias(int l) const { return biases_[l]; }

  // Flat view: layer by layer, weights row-major then bias.
  double& param(size_t k);
  double param(size_t k) const { return const_cast<Mlp*>(this)->param(k); }

  bool all_finite() const;

 private:
  std::vector<int> sizes_;
  std::vector<Eigen::MatrixXd> weights_;  // sizes[l+1] x sizes[l]
  std::vector<Eigen::VectorXd> biases_;
};

struct MlpGrads {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  static MlpGrads zeros_like(const Mlp& net);
  void set_zero();
  double& param(size_t k);
  double param(size_t k) const { return const_cast<MlpGrads*>(this)->param(k); }
  MlpGrads& operator+=(const MlpGrads& other);
};

struct AdamConfig {
  double learning_rate = 1e-4;
  double decay = 0.99;  // multiplicative, once per training episode
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  Adam() = default;
  Adam(const Mlp& net, AdamConfig cfg);

  void step(Mlp& net, const MlpGrads& grads);
  void decay_learning_rate() { lr_ *= cfg_.decay; }

  const AdamConfig& config() const { return cfg_; }
  double learning_rate() const { return lr_; }
  uint64_t steps() const { return t_; }
  const MlpGrads& first_moment() const { return m_; }
  const MlpGrads& second_moment() const { return v_; }

  // Checkpoint restore.
  void restore(uint64_t steps, double lr, MlpGrads m, MlpGrads v) {
    t_ = steps;
    lr_ = lr;
    m_ = std::move(m);
    v_ = std::move(v);
  }

 private:
  AdamConfig cfg_;
  double lr_ = 0.0;
  uint64_t t_ = 0;
  MlpGrads m_;
  MlpGrads v_;
};

// A driver's distribution over its feasible candidate orders.
struct PolicyDistribution {
  std::vector<int> candidates;  // indices into the score vector
  std::vector<double> probs;
};

// Softmax over the feasible entries only (max-shifted). Returns nullopt when
// nothing is feasible: the driver has no action this step.
std::optional<PolicyDistribution> masked_softmax(std::span<const double> scores,
                                                 std::span<const uint8_t> feasible);

// Plain softmax over all entries, in place.
void softmax_inplace(std::span<double> v);

}  // namespace ridepool
