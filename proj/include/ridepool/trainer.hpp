#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "ridepool/advantage.hpp"
#include "ridepool/config.hpp"
#include "ridepool/mlp.hpp"
#include "ridepool/sim.hpp"

namespace ridepool {

// Driver block plus the mean order block of the pool.
inline constexpr int kCriticInputDim = 10;

std::vector<int> policy_layer_sizes(const Config& cfg);
std::vector<int> critic_layer_sizes(const Config& cfg);

// One driver's decision in one step. Candidate features occupy columns
// [first_col, first_col + n_candidates) of the episode buffer.
struct Transition {
  int agent = -1;
  int step = -1;
  int first_col = 0;
  int n_candidates = 0;
  int chosen = -1;  // index within the candidates
  double old_prob = 0.0;
  double reward = 0.0;

  bool assigned() const { return reward != 0.0; }
};

struct EpisodeBuffer {
  int feature_dim = 0;
  int steps = 0;
  int agents = 0;
  std::vector<double> features;  // column-major, feature_dim per column
  std::vector<Transition> transitions;
  Eigen::MatrixXd rewards;            // steps x agents
  std::vector<double> spread_delta;   // per step
  std::vector<double> critic_inputs;  // kCriticInputDim per (step, agent), step-major
  EpisodeMetrics metrics;
  int noise_flips = 0;

  int columns() const {
    return feature_dim == 0 ? 0 : static_cast<int>(features.size()) / feature_dim;
  }
  Eigen::Map<const Eigen::MatrixXd> feature_matrix() const {
    return {features.data(), feature_dim, columns()};
  }
};

struct StepTimings {
  double scoring_s = 0.0;
  double matching_s = 0.0;
  double routing_s = 0.0;
  double learning_s = 0.0;
};

struct RolloutOptions {
  const Mlp* policy = nullptr;  // null dispatches greedily
  bool idle_action = false;
  double noise = 0.0;
  uint64_t noise_seed = 0;
  EpisodeBuffer* buffer = nullptr;
  bool record_critic_inputs = false;
  StepTimings* timings = nullptr;
  // Called with the assignment about to be applied, before the world moves.
  std::function<void(const World&, const Assignment&)> before_step;
  // Called after every step with the world already advanced.
  std::function<void(const World&, const Assignment&, const StepOutcome&)> on_step;
};

// Policy scores for the current pool: per-driver softmax over its feasible
// orders (plus the idle logit when enabled), stored as probabilities in a
// ScoreMatrix.
struct PolicyScores {
  ScoreMatrix probs;
  Eigen::MatrixXd features;     // one column per feasible pair, driver-major
  std::vector<int> first_col;   // per driver
  std::vector<int> candidates;  // pool positions, aligned with columns
};

PolicyScores score_pool(const World& world, const Mlp& policy, bool idle_action = false);

// Softmax over one driver's candidate scores; with `idle_action` a zero logit
// is appended as the last entry.
void candidate_probs(std::span<const double> scores, bool idle_action, std::vector<double>& out);

void encode_critic_input(const World& world, int driver, std::span<double> out);

// Runs one episode and returns its metrics. World invariants are checked
// after every step.
EpisodeMetrics run_episode(const SimConfig& cfg, const OrderSource& source,
                           uint64_t world_seed, const RolloutOptions& opts);

std::vector<EpisodeMetrics> evaluate(const SimConfig& cfg, const OrderSource& source,
                                     const Mlp* policy, std::span<const uint64_t> seeds,
                                     bool idle_action = false);

uint64_t training_world_seed(uint64_t run_seed, int episode);

struct TrainingSample {
  int transition = -1;
  double advantage = 0.0;
};

// Advantage per trainable transition. Zero-reward transitions never appear.
// `critic_values` holds V per (step, agent), step-major; only IPPO reads it.
std::vector<TrainingSample> policy_samples(const EpisodeBuffer& buffer,
                                           const TrainerConfig& cfg,
                                           std::span<const double> critic_values = {});

struct LossStats {
  double loss = 0.0;
  double kl = 0.0;
  int samples = 0;
};

// Mean policy loss over `batch` and, when `grads` is set, its gradient added
// into `grads`. `ref_scores` holds the reference policy's score per buffer
// column; empty disables the KL term.
LossStats policy_loss(const Mlp& policy, const EpisodeBuffer& buffer,
                      std::span<const TrainingSample> batch, const TrainerConfig& cfg,
                      std::span<const double> ref_scores, MlpGrads* grads);

struct EpisodeReport {
  int episode = 0;
  EpisodeMetrics rollout;
  double noise = 0.0;
  int noise_flips = 0;
  int samples = 0;
  double loss = 0.0;
  double kl = 0.0;
  double critic_loss = 0.0;
  bool skipped = false;
};

class Trainer {
 public:
  Trainer(const Config& cfg, OrderSource source);

  // Collects one episode with exploration noise and optimises on it.
  EpisodeReport train_episode();

  // Copies the live policy into the KL reference.
  void install_reference() { reference_ = policy_; }

  // Forwarded to every training rollout.
  void set_step_observer(
      std::function<void(const World&, const Assignment&, const StepOutcome&)> observer) {
    observer_ = std::move(observer);
  }
  void set_pre_step_observer(std::function<void(const World&, const Assignment&)> observer) {
    pre_observer_ = std::move(observer);
  }

  int episode() const { return episode_; }
  const Config& config() const { return cfg_; }
  const OrderSource& source() const { return source_; }
  const Mlp& policy() const { return policy_; }
  const Mlp& reference() const { return reference_; }
  const Adam& optimizer() const { return adam_; }
  const StepTimings& timings() const { return timings_; }

 private:
  double update_critic(const EpisodeBuffer& buffer, std::vector<double>& values);

  Config cfg_;
  OrderSource source_;
  Mlp policy_;
  Mlp reference_;
  Adam adam_;
  Mlp critic_;
  Adam critic_adam_;
  int episode_ = 0;
  StepTimings timings_;
  std::function<void(const World&, const Assignment&, const StepOutcome&)> observer_;
  std::function<void(const World&, const Assignment&)> pre_observer_;
};

}  // namespace ridepool
