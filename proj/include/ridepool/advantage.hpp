#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "ridepool/matching.hpp"
#include "ridepool/mlp.hpp"

namespace ridepool {

inline constexpr double kSigmaFloor = 1e-8;
inline constexpr double kProbFloor = 1e-12;

struct GroupStats {
  double mean = 0.0;
  double std = 0.0;  // population
  int count = 0;
};

// Mean and population std of the nonzero entries. Zero rewards mark drivers
// that took no order and never enter the statistics.
GroupStats nonzero_stats(std::span<const double> rewards);
GroupStats nonzero_stats(const Eigen::MatrixXd& rewards);

double population_std(std::span<const double> v);

// Per-step group-relative advantage for one step's drivers:
//   (r_i - mu_t) / max(sigma_t, 1e-8) - alpha * (spread_after - spread_before)
// Entries for drivers with zero reward are empty. All empty when nobody was
// assigned.
std::vector<std::optional<double>> ospo_advantage(std::span<const double> step_rewards,
                                                  double spread_before,
                                                  double spread_after, double alpha);

// Same, with the spread (population std of all drivers' cumulative rewards)
// computed from the cumulative rewards before and after the step.
std::vector<std::optional<double>> ospo_advantage(std::span<const double> step_rewards,
                                                  std::span<const double> cum_before,
                                                  std::span<const double> cum_after,
                                                  double alpha);

// Episode-level advantages over a (steps x drivers) reward table.
// Cells with zero reward carry no action and must not be trained on; their
// values in `values` are meaningless. Empty `values` means no driver was ever
// assigned and the update should be skipped.
struct EpisodeAdvantages {
  Eigen::MatrixXd values;
  GroupStats stats;
};

// Discounted sum of episode-normalised rewards from step t to the end, with
// idle steps normalised as (0 - mu) / sigma, minus alpha * spread change at t.
// Computed by backward recursion.
EpisodeAdvantages grpo_advantage(const Eigen::MatrixXd& rewards,
                                 std::span<const double> spread_delta, double gamma,
                                 double alpha);

// One-step advantage with episode-level statistics.
EpisodeAdvantages ospo_episode_advantage(const Eigen::MatrixXd& rewards,
                                         std::span<const double> spread_delta,
                                         double alpha);

// Per-step statistics (the OSPO default) over the whole table.
EpisodeAdvantages ospo_step_advantage(const Eigen::MatrixXd& rewards,
                                      std::span<const double> spread_delta,
                                      double alpha);

// Raw discounted returns G_t = r_t + gamma * G_{t+1}.
std::vector<double> discounted_returns(std::span<const double> rewards, double gamma);

// Generalised advantage estimation. `values` has one more entry than
// `rewards` (bootstrap value after the last step).
std::vector<double> gae(std::span<const double> rewards, std::span<const double> values,
                        double gamma, double lambda);

struct SurrogateTerm {
  double loss = 0.0;
  double d_loss_d_ratio = 0.0;  // zero when the clipped branch is active
};

// -min(ratio * A, clip(ratio, 1 - eps_low, 1 + eps_high) * A) for one sample.
SurrogateTerm clipped_surrogate(double ratio, double advantage, double eps_low,
                                double eps_high);

// Clipped surrogate plus KL penalty for one sample. Throws Error(kNumeric) on
// a non-finite ratio.
double ppo_surrogate_loss(double new_prob, double old_prob, double advantage,
                          double eps_low, double eps_high, double kl_weight,
                          double kl_term);

// Batch mean of ppo_surrogate_loss.
double ppo_surrogate_loss(std::span<const double> new_prob, std::span<const double> old_prob,
                          std::span<const double> advantage, double eps_low,
                          double eps_high, double kl_weight,
                          std::span<const double> kl_term);

// KL(p || q) = sum p ln(p / q); q floored at 1e-12, 0 ln 0 = 0.
double categorical_kl(std::span<const double> p, std::span<const double> q);
double categorical_kl(const PolicyDistribution& p, const PolicyDistribution& q);

// Flips each feasible score p -> 1 - p with probability `epsilon`.
// Returns the number of flipped entries.
int exploration_noise(ScoreMatrix& scores, double epsilon, std::mt19937_64& rng);

double noise_level(double initial, double decay, double floor, int episode);

// Keeps the best evaluation score; a new score is installed only on strict
// improvement (the first score always installs).
class BestCheckpointTracker {
 public:
  bool offer(double score, int episode) {
    if (best_ && !(score > *best_)) return false;
    best_ = score;
    best_episode_ = episode;
    return true;
  }
  std::optional<double> best() const { return best_; }
  int best_episode() const { return best_episode_; }

 private:
  std::optional<double> best_;
  int best_episode_ = -1;
};

}  // namespace ridepool
