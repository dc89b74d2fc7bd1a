#include "ridepool/advantage.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ridepool/common.hpp"

namespace ridepool {
namespace {

GroupStats stats_of(const double* data, size_t n) {
  GroupStats s;
  double sum = 0.0;
  for (size_t k = 0; k < n; ++k) {
    if (data[k] != 0.0) {
      sum += data[k];
      ++s.count;
    }
  }
  if (s.count == 0) return s;
  s.mean = sum / s.count;
  double ss = 0.0;
  for (size_t k = 0; k < n; ++k) {
    if (data[k] != 0.0) ss += (data[k] - s.mean) * (data[k] - s.mean);
  }
  s.std = std::sqrt(ss / s.count);
  return s;
}

void check_delta(const Eigen::MatrixXd& rewards, std::span<const double> spread_delta) {
  if (spread_delta.size() != static_cast<size_t>(rewards.rows())) {
    throw Error(ErrorCode::kShapeMismatch, "spread_delta must have one entry per step");
  }
}

}  // namespace

GroupStats nonzero_stats(std::span<const double> rewards) {
  return stats_of(rewards.data(), rewards.size());
}

GroupStats nonzero_stats(const Eigen::MatrixXd& rewards) {
  return stats_of(rewards.data(), static_cast<size_t>(rewards.size()));
}

double population_std(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

std::vector<std::optional<double>> ospo_advantage(std::span<const double> step_rewards,
                                                  double spread_before,
                                                  double spread_after, double alpha) {
  std::vector<std::optional<double>> out(step_rewards.size());
  const GroupStats s = nonzero_stats(step_rewards);
  if (s.count == 0) return out;
  const double sigma = std::max(s.std, kSigmaFloor);
  const double penalty = alpha * (spread_after - spread_before);
  for (size_t i = 0; i < step_rewards.size(); ++i) {
    if (step_rewards[i] == 0.0) continue;
    out[i] = (step_rewards[i] - s.mean) / sigma - penalty;
  }
  return out;
}

std::vector<std::optional<double>> ospo_advantage(std::span<const double> step_rewards,
                                                  std::span<const double> cum_before,
                                                  std::span<const double> cum_after,
                                                  double alpha) {
  return ospo_advantage(step_rewards, population_std(cum_before),
                        population_std(cum_after), alpha);
}

EpisodeAdvantages grpo_advantage(const Eigen::MatrixXd& rewards,
                                 std::span<const double> spread_delta, double gamma,
                                 double alpha) {
  check_delta(rewards, spread_delta);
  EpisodeAdvantages out;
  out.stats = nonzero_stats(rewards);
  if (out.stats.count == 0) return out;
  const double sigma = std::max(out.stats.std, kSigmaFloor);
  const Eigen::Index steps = rewards.rows();
  const Eigen::Index agents = rewards.cols();
  out.values.resize(steps, agents);
  for (Eigen::Index i = 0; i < agents; ++i) {
    double tail = 0.0;
    for (Eigen::Index t = steps; t-- > 0;) {
      tail = (rewards(t, i) - out.stats.mean) / sigma + gamma * tail;
      out.values(t, i) = tail;
    }
  }
  for (Eigen::Index t = 0; t < steps; ++t) {
    out.values.row(t).array() -= alpha * spread_delta[t];
  }
  return out;
}

EpisodeAdvantages ospo_episode_advantage(const Eigen::MatrixXd& rewards,
                                         std::span<const double> spread_delta,
                                         double alpha) {
  check_delta(rewards, spread_delta);
  EpisodeAdvantages out;
  out.stats = nonzero_stats(rewards);
  if (out.stats.count == 0) return out;
  const double sigma = std::max(out.stats.std, kSigmaFloor);
  out.values = (rewards.array() - out.stats.mean) / sigma;
  for (Eigen::Index t = 0; t < rewards.rows(); ++t) {
    out.values.row(t).array() -= alpha * spread_delta[t];
  }
  return out;
}

EpisodeAdvantages ospo_step_advantage(const Eigen::MatrixXd& rewards,
                                      std::span<const double> spread_delta,
                                      double alpha) {
  check_delta(rewards, spread_delta);
  EpisodeAdvantages out;
  out.stats = nonzero_stats(rewards);
  if (out.stats.count == 0) return out;
  out.values = Eigen::MatrixXd::Zero(rewards.rows(), rewards.cols());
  std::vector<double> row(static_cast<size_t>(rewards.cols()));
  for (Eigen::Index t = 0; t < rewards.rows(); ++t) {
    for (Eigen::Index i = 0; i < rewards.cols(); ++i) row[i] = rewards(t, i);
    const auto adv = ospo_advantage(row, 0.0, spread_delta[t], alpha);
    for (Eigen::Index i = 0; i < rewards.cols(); ++i) {
      if (adv[i]) out.values(t, i) = *adv[i];
    }
  }
  return out;
}

std::vector<double> discounted_returns(std::span<const double> rewards, double gamma) {
  std::vector<double> g(rewards.size());
  double tail = 0.0;
  for (size_t t = rewards.size(); t-- > 0;) {
    tail = rewards[t] + gamma * tail;
    g[t] = tail;
  }
  return g;
}

std::vector<double> gae(std::span<const double> rewards, std::span<const double> values,
                        double gamma, double lambda) {
  if (values.size() != rewards.size() + 1) {
    throw Error(ErrorCode::kShapeMismatch, "gae: values must have rewards.size() + 1 entries");
  }
  std::vector<double> adv(rewards.size());
  double tail = 0.0;
  for (size_t t = rewards.size(); t-- > 0;) {
    const double delta = rewards[t] + gamma * values[t + 1] - values[t];
    tail = delta + gamma * lambda * tail;
    adv[t] = tail;
  }
  return adv;
}

SurrogateTerm clipped_surrogate(double ratio, double advantage, double eps_low,
                                double eps_high) {
  const double clipped = std::clamp(ratio, 1.0 - eps_low, 1.0 + eps_high);
  const double unclipped_obj = ratio * advantage;
  const double clipped_obj = clipped * advantage;
  SurrogateTerm out;
  if (unclipped_obj <= clipped_obj) {
    out.loss = -unclipped_obj;
    out.d_loss_d_ratio = -advantage;
  } else {
    out.loss = -clipped_obj;
    out.d_loss_d_ratio = 0.0;
  }
  return out;
}

double ppo_surrogate_loss(double new_prob, double old_prob, double advantage,
                          double eps_low, double eps_high, double kl_weight,
                          double kl_term) {
  if (!(old_prob > 0.0)) {
    throw Error(ErrorCode::kNumeric, "ppo_surrogate_loss: old probability must be > 0");
  }
  const double ratio = new_prob / old_prob;
  if (!std::isfinite(ratio)) {
    throw Error(ErrorCode::kNumeric, "ppo_surrogate_loss: non-finite probability ratio");
  }
  return clipped_surrogate(ratio, advantage, eps_low, eps_high).loss + kl_weight * kl_term;
}

double ppo_surrogate_loss(std::span<const double> new_prob, std::span<const double> old_prob,
                          std::span<const double> advantage, double eps_low,
                          double eps_high, double kl_weight,
                          std::span<const double> kl_term) {
  const size_t n = new_prob.size();
  if (old_prob.size() != n || advantage.size() != n || kl_term.size() != n || n == 0) {
    throw Error(ErrorCode::kShapeMismatch, "ppo_surrogate_loss: batch size mismatch");
  }
  double sum = 0.0;
  for (size_t k = 0; k < n; ++k) {
    sum += ppo_surrogate_loss(new_prob[k], old_prob[k], advantage[k], eps_low, eps_high,
                              kl_weight, kl_term[k]);
  }
  return sum / static_cast<double>(n);
}

double categorical_kl(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) {
    throw Error(ErrorCode::kShapeMismatch, "categorical_kl: support size mismatch");
  }
  double kl = 0.0;
  for (size_t k = 0; k < p.size(); ++k) {
    if (p[k] <= 0.0) continue;
    kl += p[k] * std::log(p[k] / std::max(q[k], kProbFloor));
  }
  return kl;
}

double categorical_kl(const PolicyDistribution& p, const PolicyDistribution& q) {
  if (p.candidates != q.candidates) {
    throw Error(ErrorCode::kShapeMismatch, "categorical_kl: candidate sets differ");
  }
  return categorical_kl(p.probs, q.probs);
}

int exploration_noise(ScoreMatrix& scores, double epsilon, std::mt19937_64& rng) {
  if (epsilon <= 0.0) return 0;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int flips = 0;
  for (int i = 0; i < scores.drivers(); ++i) {
    for (int j = 0; j < scores.orders(); ++j) {
      if (!scores.feasible(i, j)) continue;
      if (u(rng) < epsilon) {
        scores.set(i, j, 1.0 - scores.score(i, j));
        ++flips;
      }
    }
  }
  return flips;
}

double noise_level(double initial, double decay, double floor, int episode) {
  return std::max(initial * std::pow(decay, episode), floor);
}

}  // namespace ridepool
